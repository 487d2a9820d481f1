#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmgan/checkpoint.hpp"
#include "mmgan/data.hpp"
#include "mmgan/losses.hpp"
#include "mmgan/metrics.hpp"

namespace mmgan::train {

struct TrainRecord {
  std::uint64_t step = 0;
  double d_loss = 0, g_loss = 0, eq1_value = 0, l_txt_img = 0, l_style = 0, l_total = 0;
  double wall_ms = 0;

  /// Equality over every field except wall_ms.
  bool same_values(const TrainRecord& o) const;
};

struct TrainLog {
  static constexpr const char* kHeader = "step,d_loss,g_loss,eq1_value,l_txt_img,l_style,l_total,wall_ms";
  std::vector<TrainRecord> records;

  static std::string csv_row(const TrainRecord& r);
  std::string to_csv() const;
  static TrainLog parse_csv(const std::string& text);
  bool same_values(const TrainLog& o) const;
};

/// A loss went non-finite; names the term and step.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::string term, std::uint64_t step);
  const std::string& term() const { return term_; }
  std::uint64_t step() const { return step_; }

 private:
  std::string term_;
  std::uint64_t step_;
};

/// Synthetic dataset from the config, or the manifest when one is set.
std::vector<data::Sample> load_dataset(const TrainConfig& config);
/// Synthetic runs use the caption-template vocabulary; manifests collect
/// words in order of first appearance.
enc::Vocabulary build_vocabulary(const TrainConfig& config, const std::vector<data::Sample>& samples);

/// Dataset with everything derived from it once per run.
struct TrainingData {
  std::vector<data::Sample> samples;
  data::Split split;
  std::vector<enc::TokenIds> tokens;  // per sample
  std::map<std::size_t, std::vector<std::size_t>> train_by_style;
  Tensor gram_diag;                // [N, style_feature_dim]
  std::vector<Tensor> grams;       // per style layer [N, C_l, C_l]

  static TrainingData build(const ModelBundle& bundle, std::vector<data::Sample> samples);
  /// A training sample with the same style id as `style_id`, other than
  /// `self` when the group allows it.
  std::size_t pick_style_reference(std::size_t style_id, std::size_t self, Rng& rng) const;
};

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

class Trainer {
 public:
  Trainer(ModelBundle bundle, std::vector<data::Sample> samples);
  /// Loads data, builds the vocabulary, initializes every network and trains
  /// the evaluation classifier.
  static Trainer fresh(const TrainConfig& config);

  std::size_t steps_per_epoch() const;
  std::size_t total_steps() const;
  /// Training-set indices of the batch used at `step`.
  std::vector<std::size_t> batch_indices(std::uint64_t step) const;

  /// One iteration: d_steps_per_g discriminator updates, then one generator
  /// update. Throws TrainingDiverged on a non-finite loss or gradient and
  /// leaves the bundle as it was before the call.
  TrainRecord step();

  const ModelBundle& bundle() const { return bundle_; }
  ModelBundle& bundle() { return bundle_; }
  const TrainingData& data() const { return data_; }

 private:
  TrainRecord step_unguarded();

  ModelBundle bundle_;
  TrainingData data_;
  mutable std::uint64_t cached_epoch_ = ~0ULL;
  mutable std::vector<std::vector<std::size_t>> epoch_batches_;
};

/// Every loss term of the current parameters on one batch, forward only.
/// Noise and style references come from substream(seed, "probe").
loss::LossBreakdown probe_losses(const ModelBundle& bundle, const TrainingData& data,
                                 std::span<const std::size_t> batch, const loss::LossWeights& weights,
                                 std::uint64_t seed);

struct RunOptions {
  std::optional<std::size_t> until_step;  // default: total_steps()
  bool write_files = true;                // logs, checkpoints, reports under output_dir
  std::function<void(const TrainRecord&)> on_step;
};

/// Drives Trainer::step to the target, writing the TrainLog CSV, periodic and
/// final checkpoints, and per-epoch / final / best MetricsReports.
TrainLog run(Trainer& trainer, const RunOptions& options = {});

struct EvalOptions {
  std::size_t n_gen = 64;
  std::uint64_t seed = 0;
};

/// Style vectors [N, d_style] for reference images [N,3,S,S].
Tensor style_vectors_for(const ModelBundle& bundle, const Tensor& references);

/// Generates n_gen images from held-out captions (cycled) with style
/// references drawn from the matching training style group, then scores them.
metrics::MetricsReport evaluate(const ModelBundle& bundle, const TrainingData& data, const EvalOptions& options);

/// `count` images for one caption and style reference [3,S,S]; deterministic in seed.
std::vector<Tensor> generate_images(const ModelBundle& bundle, const std::string& caption, const Tensor& style_ref,
                                    std::size_t count, std::uint64_t seed);
/// Tiles [3,S,S] images row-major into a near-square grid without borders.
Tensor tile_grid(const std::vector<Tensor>& images);

}  // namespace mmgan::train
