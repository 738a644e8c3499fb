#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "twdtw/tse.hpp"
#include "twdtw/warp_kernel.hpp"

namespace twdtw {

/// Variance floor of the per-vector logit standardization.
inline constexpr double kStandardizeEps = 1e-5;

/// (z - mean(z)) / sqrt(var(z) + eps), population variance over the vector.
std::vector<double> standardize(std::span<const double> z);

/// Pulls a gradient w.r.t. standardize(z) back to a gradient w.r.t. z.
std::vector<double> standardize_backward(std::span<const double> z,
                                         std::span<const double> grad_out);

/// softmax(-z), evaluated with the max-shift for stability.
std::vector<double> softmin(std::span<const double> z);

/// Gradient of CrossEntropy(y, softmin(z)) w.r.t. z, which is y - p.
/// Throws DegenerateProbability if any p lies outside (0, 1).
std::vector<double> loss_grad_wrt_distances(std::span<const double> y,
                                            std::span<const double> p);

struct ClassificationLoss {
  double loss = 0.0;
  std::vector<double> probs;
  /// d loss / d raw logits, through the standardization.
  std::vector<double> grad_logits;
};

/// CrossEntropy(onehot(label), softmin(standardize(z))) and its gradient.
ClassificationLoss classification_loss(std::span<const double> z, int label);

struct GradPair {
  Tensor3 dC;
  Tensor3 dU;
};

/// Accumulates upstream * |c - m| into dU and upstream * u * sign(c - m) into
/// dC for every cell of `path`. Buffers are T_c x N_f row-major.
void backprop_pair_accumulate(const WarpingPath& path, MatrixView u, MatrixView centroid,
                              MatrixView sample, double upstream, std::span<double> dU,
                              std::span<double> dC);

struct PairGrad {
  Matrix dU;
  Matrix dC;
};

PairGrad backprop_pair(const WarpingPath& path, MatrixView u, MatrixView centroid,
                       MatrixView sample, double upstream);

/// Elementwise dU * U: the gradient w.r.t. log-weights.
Tensor3 chain_to_log_weights(const Tensor3& dU, const Tensor3& U);

struct BackwardResult {
  double loss = 0.0;  ///< mean over the batch
  GradPair grads;     ///< gradients of the mean loss
  Tensor3 dLogU;
  Matrix logits;      ///< live logits along the frozen paths, batch x classes
};

/// Paths come from the frozen tensors; pointwise costs and gradients use the
/// live ones. Every sample in `batch` must carry a label. A non-finite
/// logit gives loss NaN and zero gradients.
BackwardResult full_backward(std::span<const Tse> batch, const CentroidSet& frozen_centroids,
                             const Tensor3& frozen_weights, const CentroidSet& centroids,
                             const LogWeightSet& log_weights, const WarpOptions& opts = {});

}  // namespace twdtw
