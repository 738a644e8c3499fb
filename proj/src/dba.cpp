#include "twdtw/dba.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "twdtw/random.hpp"
#include "twdtw/warp_kernel.hpp"

namespace twdtw {
namespace {

void check_config(const DbaConfig& cfg) {
  if (cfg.samples_per_class == 0 || cfg.iterations == 0 || cfg.centroid_len == 0) {
    throw Error(ErrorCode::InvalidArgument, "DBA counts must be >= 1");
  }
}

std::vector<WarpingPath> align_all(MatrixView centroid, std::span<const Tse> samples,
                                   std::vector<double>& distances) {
  std::vector<WarpingPath> paths(samples.size());
  distances.assign(samples.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < static_cast<long>(samples.size()); ++s) {
    Alignment a = align(centroid, samples[s].data.view());
    distances[s] = a.distance;
    paths[s] = std::move(a.path);
  }
  return paths;
}

}  // namespace

double dba_objective(MatrixView centroid, std::span<const Tse> samples) {
  std::vector<double> d(samples.size());
#pragma omp parallel for schedule(dynamic)
  for (long s = 0; s < static_cast<long>(samples.size()); ++s) {
    d[s] = wavefront_distance(centroid, samples[s].data.view());
  }
  return std::accumulate(d.begin(), d.end(), 0.0);
}

Matrix init_centroid(std::span<const Tse> class_samples, const DbaConfig& cfg,
                     std::uint64_t stream, DbaTrace* trace) {
  check_config(cfg);
  if (class_samples.empty()) throw Error(ErrorCode::EmptyClass, "class has no samples");
  const std::size_t nf = class_samples.front().features();
  for (const Tse& s : class_samples) {
    if (s.length() == 0 || s.features() != nf) {
      throw Error(ErrorCode::FeatureWidthMismatch,
                  "sample '" + s.id + "' differs in feature width");
    }
  }

  std::vector<std::size_t> order(class_samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(cfg.seed, "dba", stream);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), cfg.samples_per_class));
  std::vector<Tse> chosen;
  chosen.reserve(order.size());
  for (std::size_t idx : order) chosen.push_back(class_samples[idx]);

  Matrix centroid = resample_linear(chosen.front(), cfg.centroid_len).data;
  const std::size_t T = cfg.centroid_len;
  if (trace != nullptr) trace->objective.clear();

  std::vector<double> distances;
  std::vector<std::vector<double>> bucket(T * nf);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const std::vector<WarpingPath> paths = align_all(centroid.view(), chosen, distances);
    if (trace != nullptr) {
      trace->objective.push_back(std::accumulate(distances.begin(), distances.end(), 0.0));
    }
    for (auto& b : bucket) b.clear();
    for (std::size_t s = 0; s < chosen.size(); ++s) {
      for (const Cell& cell : paths[s].cells) {
        auto row = chosen[s].data.row(cell.j);
        for (std::size_t f = 0; f < nf; ++f) bucket[cell.i * nf + f].push_back(row[f]);
      }
    }
    // Every centroid row lies on every path, so no bucket is empty.
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < nf; ++f) {
        auto& vals = bucket[t * nf + f];
        auto mid = vals.begin() + static_cast<std::ptrdiff_t>((vals.size() - 1) / 2);
        std::nth_element(vals.begin(), mid, vals.end());
        centroid(t, f) = *mid;
      }
    }
  }
  if (trace != nullptr) trace->objective.push_back(dba_objective(centroid.view(), chosen));
  return centroid;
}

CentroidSet init_all_centroids(std::span<const Tse> train, std::size_t n_classes,
                               const DbaConfig& cfg, std::vector<DbaTrace>* traces) {
  check_config(cfg);
  std::vector<std::vector<Tse>> by_class(n_classes);
  for (const Tse& s : train) {
    if (s.label && *s.label >= 0 && static_cast<std::size_t>(*s.label) < n_classes) {
      by_class[static_cast<std::size_t>(*s.label)].push_back(s);
    }
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (by_class[c].empty()) {
      throw Error(ErrorCode::EmptyClass,
                  "class " + std::to_string(c) + " has no training samples");
    }
  }
  const std::size_t nf = by_class.front().front().features();
  CentroidSet out{Tensor3(n_classes, cfg.centroid_len, nf)};
  if (traces != nullptr) traces->assign(n_classes, {});
  for (std::size_t c = 0; c < n_classes; ++c) {
    Matrix cen = init_centroid(by_class[c], cfg, c,
                               traces != nullptr ? &(*traces)[c] : nullptr);
    out.data.set_slice(c, cen);
  }
  return out;
}

}  // namespace twdtw
