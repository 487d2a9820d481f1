#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mmgan/checkpoint.hpp"

namespace mmgan {

namespace {
constexpr char kMagic[4] = {'M', 'M', 'G', '1'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::string what) : s_(s), what_(std::move(what)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::string str32() { return bytes(u32()); }
  bool done() const { return pos_ == s_.size(); }
  void expect_done() const {
    if (!done()) throw std::runtime_error("checkpoint: trailing bytes in " + what_);
  }

 private:
  void need(std::uint64_t n) const {
    if (n > s_.size() - pos_) throw std::runtime_error("checkpoint: truncated " + what_);
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  const std::string& s_;
  std::string what_;
  std::size_t pos_ = 0;
};

void write_values(Writer& w, const std::vector<double>& v) {
  w.u64(v.size());
  for (double x : v) w.f64(x);
}

std::vector<double> read_values(Reader& r) {
  const auto n = r.u64();
  std::vector<double> v;
  v.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(r.f64());
  return v;
}

std::string encode_params(const nn::ParamSet& p) {
  Writer w;
  w.u32(static_cast<std::uint32_t>(p.size()));
  for (const auto& [path, t] : p) {
    w.str32(path);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    write_values(w, t.data());
  }
  return w.take();
}

nn::ParamSet decode_params(const std::string& s, const std::string& what) {
  Reader r(s, what);
  nn::ParamSet p;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string path = r.str32();
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    auto values = read_values(r);
    p.add(path, Tensor(shape, std::move(values)));
  }
  r.expect_done();
  return p;
}

void write_moments(Writer& w, const std::map<std::string, std::vector<double>>& m) {
  w.u32(static_cast<std::uint32_t>(m.size()));
  for (const auto& [path, v] : m) {
    w.str32(path);
    write_values(w, v);
  }
}

std::map<std::string, std::vector<double>> read_moments(Reader& r) {
  std::map<std::string, std::vector<double>> m;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string path = r.str32();
    m.emplace(std::move(path), read_values(r));
  }
  return m;
}

std::string encode_adam(const nn::AdamState& s) {
  Writer w;
  w.f64(s.hyper.lr);
  w.f64(s.hyper.beta1);
  w.f64(s.hyper.beta2);
  w.f64(s.hyper.eps);
  w.u64(s.t);
  write_moments(w, s.m);
  write_moments(w, s.v);
  return w.take();
}

nn::AdamState decode_adam(const std::string& bytes, const std::string& what) {
  Reader r(bytes, what);
  nn::AdamState s;
  s.hyper.lr = r.f64();
  s.hyper.beta1 = r.f64();
  s.hyper.beta2 = r.f64();
  s.hyper.eps = r.f64();
  s.t = r.u64();
  s.m = read_moments(r);
  s.v = read_moments(r);
  r.expect_done();
  return s;
}

std::string encode_vocab(const enc::Vocabulary& v) {
  Writer w;
  w.u64(v.max_caption_len());
  w.u32(static_cast<std::uint32_t>(v.tokens().size()));
  for (const auto& t : v.tokens()) w.str32(t);
  return w.take();
}

enc::Vocabulary decode_vocab(const std::string& s) {
  Reader r(s, "vocab");
  const auto max_len = r.u64();
  std::vector<std::string> tokens(r.u32());
  for (auto& t : tokens) t = r.str32();
  r.expect_done();
  return enc::Vocabulary(tokens, max_len);
}
}  // namespace

std::string serialize_checkpoint(const ModelBundle& b) {
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("config", b.config.to_json());
  sections.emplace_back("vocab", encode_vocab(b.vocab));
  for (const auto& [name, p] : b.params) sections.emplace_back("params/" + name, encode_params(p));
  for (const auto& [name, s] : b.adam) sections.emplace_back("adam/" + name, encode_adam(s));
  // Per-step randomness is a pure function of (seed, step); this records both.
  sections.emplace_back("rng", "substreams seed=" + std::to_string(b.config.seed) + " step=" + std::to_string(b.step));
  {
    Writer w;
    w.u64(b.step);
    sections.emplace_back("step", w.take());
  }
  Writer w;
  w.raw(std::string(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    w.str32(name);
    w.u64(payload.size());
    w.raw(payload);
  }
  return w.take();
}

ModelBundle deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes, "container");
  if (r.bytes(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic (not an MMG1 file)");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  std::map<std::string, std::string> sections;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str32();
    std::string payload = r.bytes(r.u64());
    if (!sections.emplace(name, std::move(payload)).second)
      throw std::runtime_error("checkpoint: duplicate section '" + name + "'");
  }
  r.expect_done();
  auto take = [&](const std::string& name) -> const std::string& {
    auto it = sections.find(name);
    if (it == sections.end()) throw std::runtime_error("checkpoint: missing section '" + name + "'");
    return it->second;
  };
  ModelBundle b;
  b.config = TrainConfig::from_json(take("config"));
  b.vocab = decode_vocab(take("vocab"));
  for (const auto& [name, payload] : sections) {
    if (name.starts_with("params/")) b.params.emplace(name.substr(7), decode_params(payload, name));
    else if (name.starts_with("adam/")) b.adam.emplace(name.substr(5), decode_adam(payload, name));
  }
  Reader sr(take("step"), "step");
  b.step = sr.u64();
  sr.expect_done();
  take("rng");
  return b;
}

void save_checkpoint(const ModelBundle& b, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(b);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("error writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace mmgan
