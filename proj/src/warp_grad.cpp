#include "twdtw/warp_grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace twdtw {
namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

struct Moments {
  double mean = 0.0;
  double inv_std = 0.0;
};

Moments moments(std::span<const double> z) {
  const auto n = static_cast<double>(z.size());
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= n;
  return {mean, 1.0 / std::sqrt(var + kStandardizeEps)};
}

}  // namespace

std::vector<double> standardize(std::span<const double> z) {
  if (z.empty()) return {};
  const Moments mo = moments(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - mo.mean) * mo.inv_std;
  return out;
}

std::vector<double> standardize_backward(std::span<const double> z,
                                         std::span<const double> grad_out) {
  if (z.empty()) return {};
  const Moments mo = moments(z);
  const auto n = static_cast<double>(z.size());
  double mean_g = 0.0;
  double mean_gx = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x = (z[i] - mo.mean) * mo.inv_std;
    mean_g += grad_out[i];
    mean_gx += grad_out[i] * x;
  }
  mean_g /= n;
  mean_gx /= n;
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x = (z[i] - mo.mean) * mo.inv_std;
    out[i] = mo.inv_std * (grad_out[i] - mean_g - x * mean_gx);
  }
  return out;
}

std::vector<double> softmin(std::span<const double> z) {
  if (z.empty()) return {};
  const double lo = *std::min_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(lo - z[i]);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> loss_grad_wrt_distances(std::span<const double> y,
                                            std::span<const double> p) {
  if (y.size() != p.size()) {
    throw Error(ErrorCode::ShapeMismatch, "label and probability lengths differ");
  }
  std::vector<double> g(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (!(p[c] > 0.0 && p[c] < 1.0)) {
      std::ostringstream msg;
      msg << "probability of class " << c << " is " << p[c];
      throw Error(ErrorCode::DegenerateProbability, msg.str());
    }
    g[c] = y[c] - p[c];
  }
  return g;
}

ClassificationLoss classification_loss(std::span<const double> z, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= z.size()) {
    throw Error(ErrorCode::InvalidArgument, "label outside class range");
  }
  const std::vector<double> zn = standardize(z);
  ClassificationLoss out;
  out.probs = softmin(zn);
  // log p_y computed in shifted form so it stays finite for confident cases.
  const double lo = *std::min_element(zn.begin(), zn.end());
  double total = 0.0;
  for (double v : zn) total += std::exp(lo - v);
  out.loss = (zn[static_cast<std::size_t>(label)] - lo) + std::log(total);

  std::vector<double> y(z.size(), 0.0);
  y[static_cast<std::size_t>(label)] = 1.0;
  const std::vector<double> g_norm = loss_grad_wrt_distances(y, out.probs);
  out.grad_logits = standardize_backward(z, g_norm);
  return out;
}

void backprop_pair_accumulate(const WarpingPath& path, MatrixView u, MatrixView centroid,
                              MatrixView sample, double upstream, std::span<double> dU,
                              std::span<double> dC) {
  const std::size_t nf = centroid.cols;
  if (!is_valid_path(path, centroid.rows, sample.rows, true) || sample.cols != nf ||
      u.rows != centroid.rows || u.cols != nf || dU.size() != centroid.rows * nf ||
      dC.size() != centroid.rows * nf) {
    throw Error(ErrorCode::PathShapeMismatch, "path or buffers do not fit the pair");
  }
  if (upstream == 0.0) return;
  for (const Cell& cell : path.cells) {
    auto c = centroid.row(cell.i);
    auto m = sample.row(cell.j);
    auto w = u.row(cell.i);
    double* du = dU.data() + cell.i * nf;
    double* dc = dC.data() + cell.i * nf;
    for (std::size_t f = 0; f < nf; ++f) {
      const double diff = c[f] - m[f];
      du[f] += upstream * std::abs(diff);
      dc[f] += upstream * w[f] * sign(diff);
    }
  }
}

PairGrad backprop_pair(const WarpingPath& path, MatrixView u, MatrixView centroid,
                       MatrixView sample, double upstream) {
  PairGrad g{Matrix(centroid.rows, centroid.cols), Matrix(centroid.rows, centroid.cols)};
  backprop_pair_accumulate(path, u, centroid, sample, upstream, g.dU.values(),
                           g.dC.values());
  return g;
}

Tensor3 chain_to_log_weights(const Tensor3& dU, const Tensor3& U) {
  if (!dU.same_shape(U)) throw Error(ErrorCode::ShapeMismatch, "dU and U differ in shape");
  Tensor3 out = dU;
  for (std::size_t k = 0; k < out.size(); ++k) out.values()[k] *= U.values()[k];
  return out;
}

BackwardResult full_backward(std::span<const Tse> batch, const CentroidSet& frozen_centroids,
                             const Tensor3& frozen_weights, const CentroidSet& centroids,
                             const LogWeightSet& log_weights, const WarpOptions& opts) {
  const Tensor3& C = centroids.data;
  if (!C.same_shape(frozen_centroids.data) || !C.same_shape(frozen_weights) ||
      !C.same_shape(log_weights.log_data)) {
    throw Error(ErrorCode::ShapeMismatch, "frozen and live parameter shapes differ");
  }
  const std::size_t n_classes = C.classes();
  const std::size_t steps = C.steps();
  const std::size_t nf = C.features();
  for (const Tse& s : batch) {
    if (!s.label || *s.label < 0 || static_cast<std::size_t>(*s.label) >= n_classes) {
      throw Error(ErrorCode::InvalidArgument, "sample '" + s.id + "' lacks a valid label");
    }
    if (s.length() == 0 || s.features() != nf) {
      throw Error(ErrorCode::ShapeMismatch, "sample '" + s.id + "' has wrong feature width");
    }
  }

  const Tensor3 U = log_weights.weights();
  const std::size_t B = batch.size();
  BackwardResult out;
  out.grads = GradPair{Tensor3(n_classes, steps, nf), Tensor3(n_classes, steps, nf)};
  out.logits = Matrix(B, n_classes);
  if (B == 0) {
    out.dLogU = Tensor3(n_classes, steps, nf);
    return out;
  }

  std::vector<WarpingPath> paths(B * n_classes);
  const auto pairs = static_cast<long>(B * n_classes);
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < pairs; ++p) {
    const auto s = static_cast<std::size_t>(p) / n_classes;
    const auto c = static_cast<std::size_t>(p) % n_classes;
    const MatrixView smp = batch[s].data.view();
    paths[p] = align(frozen_centroids.data.slice(c), smp, frozen_weights.slice(c), opts).path;
    out.logits(s, c) = path_cost(paths[p], C.slice(c), smp, U.slice(c));
  }

  // A non-finite logit poisons the loss; leave the diagnosis to the caller.
  for (double v : out.logits.values()) {
    if (!std::isfinite(v)) {
      out.loss = std::numeric_limits<double>::quiet_NaN();
      out.dLogU = Tensor3(n_classes, steps, nf);
      return out;
    }
  }

  Matrix upstream(B, n_classes);
  double loss_sum = 0.0;
  for (std::size_t s = 0; s < B; ++s) {
    const ClassificationLoss cl = classification_loss(out.logits.row(s), *batch[s].label);
    loss_sum += cl.loss;
    for (std::size_t c = 0; c < n_classes; ++c) {
      upstream(s, c) = cl.grad_logits[c] / static_cast<double>(B);
    }
  }
  out.loss = loss_sum / static_cast<double>(B);

  // One class per worker; samples accumulate in batch order.
#pragma omp parallel for schedule(static)
  for (long cc = 0; cc < static_cast<long>(n_classes); ++cc) {
    const auto c = static_cast<std::size_t>(cc);
    auto dU = out.grads.dU.mutable_slice(c);
    auto dC = out.grads.dC.mutable_slice(c);
    for (std::size_t s = 0; s < B; ++s) {
      backprop_pair_accumulate(paths[s * n_classes + c], U.slice(c), C.slice(c),
                               batch[s].data.view(), upstream(s, c), dU, dC);
    }
  }
  out.dLogU = chain_to_log_weights(out.grads.dU, U);
  return out;
}

}  // namespace twdtw
