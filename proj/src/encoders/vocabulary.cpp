#include <cctype>
#include <fstream>
#include <sstream>

#include "mmgan/encoders.hpp"

namespace mmgan::enc {

Vocabulary::Vocabulary(const std::vector<std::string>& tokens, std::size_t max_caption_len)
    : max_len_(max_caption_len) {
  if (max_caption_len == 0) throw std::invalid_argument("max_caption_len must be positive");
  for (const auto& t : tokens) {
    if (t.empty()) throw std::invalid_argument("vocabulary tokens must be non-empty");
    if (ids_.count(t)) continue;
    ids_.emplace(t, static_cast<std::int64_t>(tokens_.size() + 2));
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::size_t max_caption_len) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": empty token");
    tokens.push_back(line);
  }
  return Vocabulary(tokens, max_caption_len);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::int64_t Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::string> split_words(const std::string& caption) {
  std::vector<std::string> out;
  std::istringstream is(caption);
  std::string word;
  while (is >> word) {
    std::string clean;
    for (unsigned char c : word)
      if (!std::ispunct(c)) clean.push_back(static_cast<char>(std::tolower(c)));
    if (!clean.empty()) out.push_back(std::move(clean));
  }
  return out;
}

TokenIds tokenize(const std::string& caption, const Vocabulary& vocab) {
  TokenIds ids(vocab.max_caption_len(), kPad);
  const auto words = split_words(caption);
  for (std::size_t i = 0; i < words.size() && i < ids.size(); ++i) ids[i] = vocab.id(words[i]);
  return ids;
}

}  // namespace mmgan::enc
