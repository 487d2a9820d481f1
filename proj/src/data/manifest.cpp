#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mmgan/data.hpp"

namespace mmgan::data {

namespace {
std::size_t parse_index(const std::string& s, std::size_t line, const char* field) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size())
    throw std::runtime_error("manifest line " + std::to_string(line) + ": bad " + field + " '" + s + "'");
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, '\t')) out.push_back(cur);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}
}  // namespace

void save_manifest(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  const auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  std::filesystem::create_directories(dir / "images");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << "# relative_png_path\tcaption\tstyle_id\tclass_id\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.caption.find_first_of("\t\n\r") != std::string::npos)
      throw std::invalid_argument("manifest: caption of sample " + std::to_string(i) + " contains a tab or newline");
    char name[32];
    std::snprintf(name, sizeof name, "images/%06zu.png", i);
    write_png(dir / name, s.image);
    out << name << '\t' << s.caption << '\t' << s.style_id << '\t' << s.class_id << '\n';
  }
  if (!out) throw std::runtime_error("error writing manifest " + path.string());
}

std::vector<Sample> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto dir = path.parent_path();
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 4)
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": expected 4 tab-separated fields, got " +
                               std::to_string(f.size()));
    const auto img_path = dir / f[0];
    if (!std::filesystem::exists(img_path))
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": missing image " + img_path.string());
    Sample s;
    try {
      s.image = read_png(img_path);
    } catch (const std::exception& e) {
      throw std::runtime_error("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    s.caption = f[1];
    s.style_id = parse_index(f[2], lineno, "style_id");
    s.class_id = parse_index(f[3], lineno, "class_id");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mmgan::data
