#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmgan/arch.hpp"
#include "mmgan/nn.hpp"

// Conditioning pathways: caption encoder, image encoder, and the frozen
// random-feature style network with its Gram statistics.
namespace mmgan::enc {

using TokenIds = std::vector<std::int64_t>;

inline constexpr std::int64_t kPad = 0;
inline constexpr std::int64_t kUnk = 1;

class Vocabulary {
 public:
  /// Ids 0 and 1 are PAD and UNK; tokens get ids from 2 in the given order
  /// (duplicates ignored).
  Vocabulary(const std::vector<std::string>& tokens, std::size_t max_caption_len);

  /// One token per line; line k (0-based) holds id k + 2.
  static Vocabulary load(const std::filesystem::path& path, std::size_t max_caption_len);
  void save(const std::filesystem::path& path) const;

  std::int64_t id(const std::string& token) const;
  std::size_t size() const { return tokens_.size() + 2; }
  std::size_t max_caption_len() const { return max_len_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.max_len_ == b.max_len_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> ids_;
  std::size_t max_len_;
};

/// Lowercased, punctuation-stripped whitespace tokens.
std::vector<std::string> split_words(const std::string& caption);

/// Ids padded or truncated to max_caption_len, UNK for unknown words.
TokenIds tokenize(const std::string& caption, const Vocabulary& vocab);

/// Word-embedding table bound of the text encoder, U[-b, b].
inline constexpr double kTextEmbedBound = 1.0;

nn::LayerSpec text_encoder_spec(const ArchConfig& arch);
nn::LayerSpec image_encoder_spec(const ArchConfig& arch);
nn::LayerSpec style_net_spec(const ArchConfig& arch);

/// Mean-pooled token embeddings through a two-layer MLP with tanh output.
/// Result is [N, d_text].
Var encode_text(const nn::Bound& params, const std::vector<TokenIds>& tokens, const ArchConfig& arch);

/// Strided CNN, global average pool, dense projection: [N,3,S,S] -> [N, d_text].
Var encode_image(const nn::Bound& params, Var images, const ArchConfig& arch);

/// Activations after each configured tap of the style network, in
/// style_layers order.
std::vector<Var> style_features(const nn::Bound& params, Var images, const ArchConfig& arch);

/// [N,C,H,W] -> [N,C,C], normalized by C*H*W.
Var gram_matrix(Var fmap);

// Single-sample conveniences over frozen parameters.
Tensor encode_text(const TokenIds& tokens, const nn::ParamSet& params, const ArchConfig& arch);
Tensor encode_image(const Tensor& image, const nn::ParamSet& params, const ArchConfig& arch);
std::vector<Tensor> style_features(const Tensor& image, const nn::ParamSet& params, const ArchConfig& arch);
/// [C,H,W] -> [C,C]
Tensor gram_matrix(const Tensor& fmap);

/// Validates [N,3,S,S] (or [3,S,S] when batched is false) against the arch.
void check_image_shape(const Shape& shape, const ArchConfig& arch, bool batched);

}  // namespace mmgan::enc
