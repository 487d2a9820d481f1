#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmgan/arch.hpp"
#include "mmgan/data.hpp"
#include "mmgan/losses.hpp"
#include "mmgan/nn.hpp"

namespace mmgan {

/// Every run-wide setting. The structured-text form is a JSON object whose
/// keys are exactly the field names below (architecture fields inlined).
struct TrainConfig {
  std::uint64_t seed = 0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t max_steps = 0;  // 0: epochs * steps_per_epoch
  double lambda_gan = 1.0;
  double lambda_txt_img = 10.0;
  double lambda_style = 10.0;
  loss::GanObjective gan_objective = loss::GanObjective::kNonSaturating;
  std::size_t d_steps_per_g = 1;
  bool train_text_encoder = false;
  ArchConfig arch;

  std::size_t dataset_samples = 256;
  std::uint64_t dataset_seed = 1;
  double test_fraction = 0.25;
  std::string manifest;  // empty: synthetic dataset

  std::size_t classifier_steps = 200;
  std::size_t checkpoint_every = 0;  // steps; 0: final checkpoint only
  std::size_t eval_every_epochs = 1;  // 0: final evaluation only
  std::size_t n_gen = 64;
  std::string output_dir = "run";
  std::string precision = "double";
  double grad_clip = 0.0;  // reserved; must be 0

  void validate() const;
  loss::LossWeights weights() const { return {lambda_gan, lambda_txt_img, lambda_style}; }
  nn::AdamConfig adam() const { return {lr, beta1, beta2, adam_eps}; }
  data::DatasetSpec dataset_spec() const;

  std::string to_json() const;
  /// Unknown keys and ill-typed values are rejected; absent keys keep `base`.
  static TrainConfig from_json(const std::string& json, const TrainConfig& base);
  static TrainConfig from_json(const std::string& json);
  static TrainConfig load(const std::filesystem::path& path, const TrainConfig& base);
  static TrainConfig load(const std::filesystem::path& path);
  /// Applies one `key=value` override using the same key names.
  void set(const std::string& key, const std::string& value);

  /// Hex FNV-1a of the canonical JSON.
  std::string digest() const;

  static const std::vector<std::string>& keys();

  friend bool operator==(const TrainConfig& a, const TrainConfig& b) { return a.to_json() == b.to_json(); }
};

}  // namespace mmgan
