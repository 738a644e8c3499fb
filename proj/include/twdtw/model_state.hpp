#pragma once

#include <cstdint>

#include "twdtw/tse.hpp"

namespace twdtw {

/// First and second Adam moments for one parameter tensor.
struct AdamMoments {
  Tensor3 m;
  Tensor3 v;
};

/// Everything needed to resume training: parameters, optimizer moments and
/// progress counters.
struct ModelState {
  CentroidSet centroids;
  LogWeightSet log_weights;
  AdamMoments centroid_moments;
  AdamMoments weight_moments;
  std::uint32_t epoch = 0;
  std::uint64_t step = 0;

  static ModelState fresh(CentroidSet centroids, LogWeightSet log_weights);

  std::size_t n_classes() const { return centroids.n_classes(); }
};

inline ModelState ModelState::fresh(CentroidSet centroids, LogWeightSet log_weights) {
  const Tensor3& c = centroids.data;
  ModelState s;
  s.centroid_moments = {Tensor3(c.classes(), c.steps(), c.features()),
                        Tensor3(c.classes(), c.steps(), c.features())};
  s.weight_moments = s.centroid_moments;
  s.centroids = std::move(centroids);
  s.log_weights = std::move(log_weights);
  return s;
}

}  // namespace twdtw
