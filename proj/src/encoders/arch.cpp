#include "mmgan/arch.hpp"

#include <stdexcept>

namespace mmgan {

std::string to_string(StyleInjection s) { return s == StyleInjection::kModulation ? "modulation" : "concat"; }

StyleInjection style_injection_from_string(const std::string& s) {
  if (s == "modulation") return StyleInjection::kModulation;
  if (s == "concat") return StyleInjection::kConcat;
  throw std::invalid_argument("style_injection must be 'modulation' or 'concat', got '" + s + "'");
}

std::size_t ArchConfig::style_feature_dim() const {
  std::size_t n = 0;
  for (auto l : style_layers) n += style_channels.at(l);
  return n;
}

void ArchConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("architecture: " + msg); };
  // A 1x1 base map would make the first instance norm output identically zero.
  if (image_size < 16 || image_size % 8 != 0) fail("image_size must be a multiple of 8 and at least 16");
  for (auto [name, v] : {std::pair{"d_text", d_text}, {"d_z", d_z}, {"d_style", d_style}, {"d_word", d_word},
                         {"text_hidden", text_hidden}, {"max_caption_len", max_caption_len},
                         {"num_classes", num_classes}, {"style_head_hidden", style_head_hidden}})
    if (v == 0) fail(std::string(name) + " must be positive");
  auto three = [&](const char* name, const std::vector<std::size_t>& c) {
    if (c.size() != 3) fail(std::string(name) + " needs exactly 3 entries");
    for (auto x : c)
      if (x == 0) fail(std::string(name) + " entries must be positive");
  };
  three("g_channels", g_channels);
  three("d_channels", d_channels);
  three("enc_channels", enc_channels);
  three("fid_channels", fid_channels);
  if (style_channels.empty()) fail("style_channels must not be empty");
  for (auto x : style_channels)
    if (x == 0) fail("style_channels entries must be positive");
  if (classifier_channels.size() != 2) fail("classifier_channels needs exactly 2 entries");
  if (style_layers.empty()) fail("style_layers must not be empty");
  for (std::size_t i = 0; i < style_layers.size(); ++i) {
    if (style_layers[i] >= style_channels.size()) fail("style layer index out of range");
    if (i && style_layers[i] <= style_layers[i - 1]) fail("style_layers must be strictly increasing");
  }
}

}  // namespace mmgan
