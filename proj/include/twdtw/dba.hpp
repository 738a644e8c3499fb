#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "twdtw/tse.hpp"

namespace twdtw {

struct DbaConfig {
  std::size_t samples_per_class = 50;
  std::size_t iterations = 100;
  std::size_t centroid_len = kDefaultCentroidLength;
  std::uint64_t seed = 0;
};

/// Surrogate objective J_k = sum_s D_v(centroid_k, s) for k = 0..iterations.
struct DbaTrace {
  std::vector<double> objective;
};

/// sum over samples of unweighted no-diagonal warp distance to `centroid`.
double dba_objective(MatrixView centroid, std::span<const Tse> samples);

/// Barycenter averaging for one class: start from the first sampled sequence
/// resampled to `centroid_len`, then alternate alignment and per-feature
/// lower-median updates of each centroid row. `stream` separates the
/// subsampling streams of different classes.
Matrix init_centroid(std::span<const Tse> class_samples, const DbaConfig& cfg,
                     std::uint64_t stream = 0, DbaTrace* trace = nullptr);

/// One centroid per class index, from the labelled samples in `train`.
CentroidSet init_all_centroids(std::span<const Tse> train, std::size_t n_classes,
                               const DbaConfig& cfg,
                               std::vector<DbaTrace>* traces = nullptr);

}  // namespace twdtw
