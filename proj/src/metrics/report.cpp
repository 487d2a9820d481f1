#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "mmgan/metrics.hpp"

namespace mmgan::metrics {

namespace {
std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("metrics report: bad number for '" + key + "': " + v);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

constexpr const char* kGroupPrefix = "style_match.";
}  // namespace

void MetricsReport::validate() const {
  auto bad = [](const char* what) { throw std::domain_error(std::string("metrics report: ") + what + " out of range"); };
  if (!(fid >= 0.0)) bad("fid");
  if (!(is_mean >= 1.0 - 1e-12)) bad("is_mean");
  for (double c : {clip_consistency, clip_consistency_shuffled, style_match})
    if (!(c >= -1.0 && c <= 1.0)) bad("cosine score");
  for (const auto& [k, v] : style_match_by_group)
    if (!(v >= -1.0 && v <= 1.0)) bad("style_match group");
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "fid = " << fmt(fid) << "\n"
     << "is_mean = " << fmt(is_mean) << "\n"
     << "clip_consistency = " << fmt(clip_consistency) << "\n"
     << "clip_consistency_shuffled = " << fmt(clip_consistency_shuffled) << "\n"
     << "style_match = " << fmt(style_match) << "\n";
  for (const auto& [g, v] : style_match_by_group) os << kGroupPrefix << g << " = " << fmt(v) << "\n";
  os << "sample_count = " << sample_count << "\n"
     << "step = " << step << "\n"
     << "config_digest = " << config_digest << "\n"
     << "extractors = " << extractors << "\n";
  return os.str();
}

MetricsReport MetricsReport::from_text(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw std::invalid_argument("metrics report line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 3));
    if (key == "fid") r.fid = parse_double(key, val);
    else if (key == "is_mean") r.is_mean = parse_double(key, val);
    else if (key == "clip_consistency") r.clip_consistency = parse_double(key, val);
    else if (key == "clip_consistency_shuffled") r.clip_consistency_shuffled = parse_double(key, val);
    else if (key == "style_match") r.style_match = parse_double(key, val);
    else if (key.starts_with(kGroupPrefix)) r.style_match_by_group[key.substr(12)] = parse_double(key, val);
    else if (key == "sample_count") r.sample_count = static_cast<std::size_t>(parse_double(key, val));
    else if (key == "step") r.step = static_cast<std::size_t>(parse_double(key, val));
    else if (key == "config_digest") r.config_digest = val;
    else if (key == "extractors") r.extractors = val;
    else throw std::invalid_argument("metrics report line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["fid"] = fid;
  j["is_mean"] = is_mean;
  j["clip_consistency"] = clip_consistency;
  j["clip_consistency_shuffled"] = clip_consistency_shuffled;
  j["style_match"] = style_match;
  j["style_match_by_group"] = style_match_by_group;
  j["sample_count"] = sample_count;
  j["step"] = step;
  j["config_digest"] = config_digest;
  j["extractors"] = extractors;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  r.fid = j.at("fid").get<double>();
  r.is_mean = j.at("is_mean").get<double>();
  r.clip_consistency = j.at("clip_consistency").get<double>();
  r.clip_consistency_shuffled = j.at("clip_consistency_shuffled").get<double>();
  r.style_match = j.at("style_match").get<double>();
  r.style_match_by_group = j.at("style_match_by_group").get<std::map<std::string, double>>();
  r.sample_count = j.at("sample_count").get<std::size_t>();
  r.step = j.at("step").get<std::size_t>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.extractors = j.at("extractors").get<std::string>();
  return r;
}

}  // namespace mmgan::metrics
