#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twdtw/data_io.hpp"
#include "twdtw/dba.hpp"
#include "twdtw/model_state.hpp"
#include "twdtw/tse.hpp"
#include "twdtw/warp_kernel.hpp"

namespace twdtw {

enum class WeightInit { One, Random };

struct TrainConfig {
  std::size_t epochs = 36;
  std::size_t batch_size = 48;
  double lr_logw = 1e-3;
  double lr_centroid_ratio = 1.0 / 3.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  WeightInit weight_init = WeightInit::One;
  bool freeze_weights = false;
  bool freeze_centroids = false;
  bool allow_diagonal = false;
  bool fecw = true;
  std::size_t topk = 5;
  std::size_t dba_samples_per_class = 50;
  std::size_t dba_iterations = 100;
  std::size_t centroid_len = kDefaultCentroidLength;
  std::uint64_t seed = 0;

  void validate() const;
  /// Assigns one key from its textual value; unknown keys are errors.
  void set(const std::string& key, const std::string& value);
  /// Sorted `key=value` lines; the basis of `hash()` and of report echoes.
  std::string canonical() const;
  std::uint64_t hash() const;

  WarpOptions warp_options() const;
  DbaConfig dba_config() const;
};

/// Applies `key = value` lines (blank lines and '#' comments ignored).
void apply_config_text(TrainConfig& cfg, const std::string& text);

/// lr at 0-based `epoch`: base * 0.5 * (1 + cos(pi * epoch / epochs)).
double cosine_lr(double base, std::size_t epoch, std::size_t epochs);

/// Decoupled-weight-decay Adam with bias correction.
struct AdamW {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  /// `step` is the 1-based update count used for bias correction.
  void update(Tensor3& param, const Tensor3& grad, AdamMoments& moments,
              std::uint64_t step) const;
};

/// Fresh state: DBA centroids and log-weights initialised per `cfg`.
ModelState initial_state(std::span<const Tse> train, std::size_t n_classes,
                         const TrainConfig& cfg);

struct Prediction {
  std::vector<double> probs;
  std::vector<double> logits;
};

/// softmin over standardized weighted warp distances to every centroid.
Prediction predict(const Tse& sample, const CentroidSet& centroids, const Tensor3& weights,
                   const WarpOptions& opts = {});

/// Mean classification loss over `samples` using the live parameters for
/// both paths and costs.
double dataset_loss(const ModelState& state, std::span<const Tse> samples,
                    const TrainConfig& cfg);

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t batches = 0;
};

/// One pass over `train` in a seeded shuffled order. Advances state.epoch.
EpochStats train_epoch(ModelState& state, std::span<const Tse> train,
                       const TrainConfig& cfg);

struct ClassStats {
  std::size_t count = 0;
  std::size_t correct = 0;
};

struct EvalResult {
  double top1 = 0.0;
  double topk = 0.0;
  std::size_t k = 0;
  std::vector<ClassStats> per_class;
};

EvalResult evaluate(const ModelState& state, std::span<const Tse> samples,
                    const WarpOptions& opts = {}, std::size_t k = 5);

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double val_top1 = 0.0;
  double val_topk = 0.0;
  double lr_logw = 0.0;
  double lr_centroid = 0.0;
  double seconds = 0.0;
};

struct TrainingReport {
  double initial_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  ///< 1-based, first epoch reaching best_top1
  double best_top1 = 0.0;
  double best_topk = 0.0;
  ModelState best_state;
  ModelState final_state;
};

/// Initialises (unless `init` is given), then trains for cfg.epochs with a
/// validation pass after each epoch, keeping the best state by top-1.
TrainingReport run_training(const Dataset& data, const TrainConfig& cfg,
                            std::optional<ModelState> init = std::nullopt,
                            const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace twdtw
