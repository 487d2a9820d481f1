#include "mmgan/config.hpp"

#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "mmgan/random.hpp"

namespace mmgan {

namespace {
using Json = nlohmann::ordered_json;

struct Field {
  std::function<Json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const Json&)> set;
};

template <class T>
T checked(const Json& j) {
  auto bad = [] { throw std::invalid_argument("wrong type"); };
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) bad();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!j.is_number_unsigned()) bad();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) bad();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!j.is_string()) bad();
  } else {
    if (!j.is_array()) bad();
    T out;
    for (const auto& e : j) out.push_back(checked<typename T::value_type>(e));
    return out;
  }
  return j.get<T>();
}

template <class T>
Field plain(T TrainConfig::*m) {
  return {[m](const TrainConfig& c) { return Json(c.*m); }, [m](TrainConfig& c, const Json& j) { c.*m = checked<T>(j); }};
}

template <class T>
Field arch(T ArchConfig::*m) {
  return {[m](const TrainConfig& c) { return Json(c.arch.*m); },
          [m](TrainConfig& c, const Json& j) { c.arch.*m = checked<T>(j); }};
}

// Ordered as written to disk.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f{
      {"seed", plain(&TrainConfig::seed)},
      {"lr", plain(&TrainConfig::lr)},
      {"beta1", plain(&TrainConfig::beta1)},
      {"beta2", plain(&TrainConfig::beta2)},
      {"adam_eps", plain(&TrainConfig::adam_eps)},
      {"batch_size", plain(&TrainConfig::batch_size)},
      {"epochs", plain(&TrainConfig::epochs)},
      {"max_steps", plain(&TrainConfig::max_steps)},
      {"lambda_gan", plain(&TrainConfig::lambda_gan)},
      {"lambda_txt_img", plain(&TrainConfig::lambda_txt_img)},
      {"lambda_style", plain(&TrainConfig::lambda_style)},
      {"gan_objective",
       {[](const TrainConfig& c) { return Json(loss::to_string(c.gan_objective)); },
        [](TrainConfig& c, const Json& j) { c.gan_objective = loss::gan_objective_from_string(j.get<std::string>()); }}},
      {"d_steps_per_g", plain(&TrainConfig::d_steps_per_g)},
      {"train_text_encoder", plain(&TrainConfig::train_text_encoder)},
      {"image_size", arch(&ArchConfig::image_size)},
      {"d_text", arch(&ArchConfig::d_text)},
      {"d_z", arch(&ArchConfig::d_z)},
      {"d_style", arch(&ArchConfig::d_style)},
      {"d_word", arch(&ArchConfig::d_word)},
      {"text_hidden", arch(&ArchConfig::text_hidden)},
      {"max_caption_len", arch(&ArchConfig::max_caption_len)},
      {"vocab_size", arch(&ArchConfig::vocab_size)},
      {"num_classes", arch(&ArchConfig::num_classes)},
      {"style_head_hidden", arch(&ArchConfig::style_head_hidden)},
      {"g_channels", arch(&ArchConfig::g_channels)},
      {"d_channels", arch(&ArchConfig::d_channels)},
      {"enc_channels", arch(&ArchConfig::enc_channels)},
      {"style_channels", arch(&ArchConfig::style_channels)},
      {"style_layers", arch(&ArchConfig::style_layers)},
      {"fid_channels", arch(&ArchConfig::fid_channels)},
      {"classifier_channels", arch(&ArchConfig::classifier_channels)},
      {"style_injection",
       {[](const TrainConfig& c) { return Json(to_string(c.arch.style_injection)); },
        [](TrainConfig& c, const Json& j) { c.arch.style_injection = style_injection_from_string(j.get<std::string>()); }}},
      {"dataset_samples", plain(&TrainConfig::dataset_samples)},
      {"dataset_seed", plain(&TrainConfig::dataset_seed)},
      {"test_fraction", plain(&TrainConfig::test_fraction)},
      {"manifest", plain(&TrainConfig::manifest)},
      {"classifier_steps", plain(&TrainConfig::classifier_steps)},
      {"checkpoint_every", plain(&TrainConfig::checkpoint_every)},
      {"eval_every_epochs", plain(&TrainConfig::eval_every_epochs)},
      {"n_gen", plain(&TrainConfig::n_gen)},
      {"output_dir", plain(&TrainConfig::output_dir)},
      {"precision", plain(&TrainConfig::precision)},
      {"grad_clip", plain(&TrainConfig::grad_clip)},
  };
  return f;
}

const Field* find_field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return &f;
  return nullptr;
}

void apply(TrainConfig& c, const std::string& key, const Json& value) {
  const Field* f = find_field(key);
  if (!f) throw std::invalid_argument("config: unknown key '" + key + "'");
  try {
    f->set(c, value);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config: bad value for '" + key + "': " + value.dump() + " (" + e.what() + ")");
  }
}
}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : fields()) out.push_back(key);
    return out;
  }();
  return k;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0,1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1 && max_steps == 0) fail("epochs or max_steps must be positive");
  weights().validate();
  if (d_steps_per_g < 1) fail("d_steps_per_g must be >= 1");
  arch.validate();
  if (dataset_samples < 2 && manifest.empty()) fail("dataset_samples must be >= 2");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) fail("test_fraction must be in [0,1)");
  if (n_gen < 2) fail("n_gen must be >= 2");
  if (precision != "double") fail("precision '" + precision + "' is not supported; only 'double' is implemented");
  if (grad_clip != 0.0) fail("grad_clip is reserved and must be 0");
}

data::DatasetSpec TrainConfig::dataset_spec() const {
  data::DatasetSpec s;
  s.n_samples = dataset_samples;
  s.image_size = arch.image_size;
  s.seed = dataset_seed;
  return s;
}

std::string TrainConfig::to_json() const {
  Json j = Json::object();
  for (const auto& [k, f] : fields()) j[k] = f.get(*this);
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text, const TrainConfig& base) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  TrainConfig c = base;
  for (const auto& [k, v] : j.items()) apply(c, k, v);
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json(const std::string& text) { return from_json(text, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::filesystem::path& path) { return load(path, TrainConfig{}); }

TrainConfig TrainConfig::load(const std::filesystem::path& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), base);
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw std::invalid_argument("config: unknown key '" + key + "'");
  // Numbers, booleans and arrays parse as JSON; anything else is a string.
  Json v;
  try {
    v = Json::parse(value);
  } catch (const nlohmann::json::exception&) {
    v = value;
  }
  if (f->get(*this).is_string()) v = value;
  apply(*this, key, v);
}

std::string TrainConfig::digest() const {
  const std::string s = to_json();
  const auto h = fnv1a(s);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mmgan
