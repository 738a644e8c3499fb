#include "twdtw/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <omp.h>

#include "twdtw/detail/kernels.hpp"
#include "twdtw/random.hpp"
#include "twdtw/tse.hpp"

namespace twdtw {
namespace {

template <class Real>
struct PairData {
  std::vector<Real> a;
  std::vector<Real> b;
  std::vector<Real> u;
};

template <class Real>
std::vector<PairData<Real>> make_pairs(const BenchConfig& cfg) {
  std::vector<PairData<Real>> pairs(cfg.pairs);
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    Rng rng = make_rng(cfg.seed, "bench", p);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    auto& d = pairs[p];
    d.a.resize(cfg.n * cfg.nf);
    d.b.resize(cfg.m * cfg.nf);
    d.u.resize(cfg.n * cfg.nf);
    for (auto& v : d.a) v = static_cast<Real>(gauss(rng));
    for (auto& v : d.b) v = static_cast<Real>(gauss(rng));
    for (auto& v : d.u) v = static_cast<Real>(pos(rng));
  }
  return pairs;
}

template <class Real>
void reference_batch(const BenchConfig& cfg, const std::vector<PairData<Real>>& pairs,
                     std::vector<Real>& out) {
  std::vector<Real> grid;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    out[p] = detail::reference_fill(pairs[p].a.data(), cfg.n, pairs[p].b.data(), cfg.m,
                                    pairs[p].u.data(), cfg.nf, false, grid);
  }
}

template <class Real>
void wavefront_batch(const BenchConfig& cfg, const std::vector<PairData<Real>>& pairs,
                     std::vector<Real>& out, int threads) {
  // Pairs are spread over workers; when there are fewer pairs than workers
  // each pair also splits its diagonals.
  const bool cells = static_cast<int>(pairs.size()) < threads;
  if (cells) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      out[p] = detail::wavefront_distance(pairs[p].a.data(), cfg.n, pairs[p].b.data(), cfg.m,
                                          pairs[p].u.data(), cfg.nf, true);
    }
    return;
  }
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long p = 0; p < static_cast<long>(pairs.size()); ++p) {
    out[p] = detail::wavefront_distance(pairs[p].a.data(), cfg.n, pairs[p].b.data(), cfg.m,
                                        pairs[p].u.data(), cfg.nf, false);
  }
}

template <class Real>
BenchResult run_typed(const BenchConfig& cfg) {
  BenchResult res;
  res.threads = omp_get_max_threads();
  const auto pairs = make_pairs<Real>(cfg);
  std::vector<Real> ref(cfg.pairs);
  std::vector<Real> wav(cfg.pairs);

  reference_batch(cfg, pairs, ref);
  wavefront_batch(cfg, pairs, wav, res.threads);
  res.agree = true;
  for (std::size_t p = 0; p < cfg.pairs; ++p) {
    const double r = ref[p];
    const double diff = std::abs(r - static_cast<double>(wav[p])) / std::max(1.0, std::abs(r));
    res.max_rel_diff = std::max(res.max_rel_diff, diff);
    if (!(diff <= 1e-9)) res.agree = false;
  }
  if (!res.agree) return res;

  using clock = std::chrono::steady_clock;
  double ref_total = 0.0;
  double wav_total = 0.0;
  for (std::size_t r = 0; r < cfg.repeat; ++r) {
    auto t0 = clock::now();
    reference_batch(cfg, pairs, ref);
    auto t1 = clock::now();
    wavefront_batch(cfg, pairs, wav, res.threads);
    auto t2 = clock::now();
    ref_total += std::chrono::duration<double>(t1 - t0).count();
    wav_total += std::chrono::duration<double>(t2 - t1).count();
  }
  const auto reps = static_cast<double>(cfg.repeat);
  res.reference_seconds = ref_total / reps;
  res.wavefront_seconds = wav_total / reps;
  res.speedup = res.wavefront_seconds > 0 ? res.reference_seconds / res.wavefront_seconds : 0.0;
  return res;
}

}  // namespace

BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.n == 0 || cfg.m == 0 || cfg.nf == 0 || cfg.pairs == 0 || cfg.repeat == 0) {
    throw Error(ErrorCode::InvalidArgument, "benchmark sizes and repeat must be >= 1");
  }
  return cfg.single_precision ? run_typed<float>(cfg) : run_typed<double>(cfg);
}

}  // namespace twdtw
