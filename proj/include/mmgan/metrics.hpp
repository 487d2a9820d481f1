#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmgan/arch.hpp"
#include "mmgan/encoders.hpp"
#include "mmgan/nn.hpp"

namespace mmgan::metrics {

inline constexpr double kCovShrinkage = 1e-6;
inline constexpr double kProbFloor = 1e-12;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

/// Rows are samples. Covariance uses the n-1 denominator plus kCovShrinkage * I.
GaussianStats feature_stats(const Eigen::MatrixXd& features);

/// Symmetrizes, clamps eigenvalues at 0, reconstructs with their square roots.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a);

/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 sqrtm(sqrtm(S_a) S_b sqrtm(S_a))), clamped at 0.
double fid(const GaussianStats& a, const GaussianStats& b);

/// exp(mean_i KL(p_i || mean_j p_j)) over rows of class probabilities.
double inception_score(const Eigen::MatrixXd& probs);

/// Cosine similarity; 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

/// Mean pairwise cosine over rows of two equally shaped feature matrices.
double consistency_score(const Eigen::MatrixXd& image_features, const Eigen::MatrixXd& text_features);
/// Same, encoding images [3,S,S] and tokenized captions first.
double consistency_score(const std::vector<Tensor>& images, const std::vector<enc::TokenIds>& captions,
                         const nn::ParamSet& image_encoder, const nn::ParamSet& text_encoder, const ArchConfig& arch);

/// Flattened Gram matrices of every style tap, concatenated.
std::vector<double> gram_vector(const Tensor& image, const nn::ParamSet& style_net, const ArchConfig& arch);
/// Rows of gram_vector for a batch [N,3,S,S].
Eigen::MatrixXd gram_vectors(const Tensor& images, const nn::ParamSet& style_net, const ArchConfig& arch);

/// Mean cosine between each image's Gram vector and the reference's.
double style_match_score(const std::vector<Tensor>& images, const Tensor& style_image, const nn::ParamSet& style_net,
                         const ArchConfig& arch);
double style_match_score(const Eigen::MatrixXd& gram_rows, std::span<const double> reference);

// Stand-in feature extractors.

/// Frozen seeded random CNN: three stride-2 conv blocks, global average pool.
/// Embedding dim is fid_channels.back().
nn::LayerSpec fid_net_spec(const ArchConfig& arch);
Eigen::MatrixXd fid_features(const Tensor& images, const nn::ParamSet& fid_net, const ArchConfig& arch);

/// Shape classifier for the inception score: two stride-2 conv blocks and a
/// dense layer to num_classes logits.
nn::LayerSpec classifier_spec(const ArchConfig& arch);
Var classifier_logits(const nn::Bound& params, Var images, const ArchConfig& arch);
Eigen::MatrixXd classifier_probs(const Tensor& images, const nn::ParamSet& classifier, const ArchConfig& arch);

struct ClassifierTraining {
  std::size_t steps = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};
/// Cross-entropy training with Adam on (images [3,S,S], labels < num_classes).
nn::ParamSet train_classifier(const std::vector<Tensor>& images, const std::vector<std::size_t>& labels,
                              const ArchConfig& arch, const ClassifierTraining& cfg);

/// Stacks [3,S,S] images (optionally a subset) into a batch [N,3,S,S].
Tensor stack_images(const std::vector<Tensor>& images);
Tensor stack_images(const std::vector<Tensor>& images, std::span<const std::size_t> indices);

struct MetricsReport {
  double fid = 0;
  double is_mean = 1;
  double clip_consistency = 0;
  double clip_consistency_shuffled = 0;
  double style_match = 0;
  std::map<std::string, double> style_match_by_group;
  std::size_t sample_count = 0;
  std::size_t step = 0;
  std::string config_digest;
  std::string extractors = "stand-in: random-CNN FID embedding, synthetic-shape IS classifier, jointly trained encoders";

  /// Range invariants: fid >= 0, is_mean >= 1, cosine scores in [-1,1].
  void validate() const;

  /// One `key = value` per line; per-group entries as `style_match.<group>`.
  std::string to_text() const;
  static MetricsReport from_text(const std::string& text);
  std::string to_json() const;
  static MetricsReport from_json(const std::string& json);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

}  // namespace mmgan::metrics
