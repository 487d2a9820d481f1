#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mmgan {

enum class StyleInjection { kModulation, kConcat };

std::string to_string(StyleInjection s);
StyleInjection style_injection_from_string(const std::string& s);

/// Network dimensions shared by every model in a checkpoint.
struct ArchConfig {
  std::size_t image_size = 32;
  std::size_t d_text = 64;  ///< also the image-feature dimension
  std::size_t d_z = 64;
  std::size_t d_style = 32;
  std::size_t d_word = 32;
  std::size_t text_hidden = 64;
  std::size_t max_caption_len = 8;
  std::size_t vocab_size = 0;
  std::size_t num_classes = 3;
  std::size_t style_head_hidden = 64;
  std::vector<std::size_t> g_channels{64, 32, 16};
  std::vector<std::size_t> d_channels{16, 32, 64};
  std::vector<std::size_t> enc_channels{16, 32, 64};
  std::vector<std::size_t> style_channels{8, 16, 32};
  std::vector<std::size_t> style_layers{0, 1, 2};
  std::vector<std::size_t> fid_channels{16, 32, 64};
  std::vector<std::size_t> classifier_channels{8, 16};
  StyleInjection style_injection = StyleInjection::kModulation;

  /// Spatial extent of the generator's first feature map and of the
  /// discriminator's text-concatenation stage.
  std::size_t base_size() const { return image_size / 8; }
  std::size_t style_feature_dim() const;

  /// Throws std::invalid_argument describing the first inconsistency.
  void validate() const;
};

}  // namespace mmgan
