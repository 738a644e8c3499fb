#pragma once

#include <cstddef>
#include <cstdint>

namespace twdtw {

struct BenchConfig {
  std::size_t n = 512;
  std::size_t m = 512;
  std::size_t nf = 64;
  std::size_t pairs = 64;
  std::size_t repeat = 3;
  bool single_precision = false;
  std::uint64_t seed = 0;
};

struct BenchResult {
  double reference_seconds = 0.0;  ///< mean per repeat, single thread
  double wavefront_seconds = 0.0;  ///< mean per repeat, all workers
  double speedup = 0.0;
  double max_rel_diff = 0.0;
  bool agree = false;
  int threads = 1;
};

/// Times single-threaded row-major evaluation of `pairs` random weighted
/// pairs against the parallel anti-diagonal engine over the same batch.
/// Both engines are checked for agreement (<= 1e-9 relative) before timing;
/// timing is skipped when they disagree.
BenchResult run_bench(const BenchConfig& cfg);

}  // namespace twdtw
