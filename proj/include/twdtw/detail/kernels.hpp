#pragma once

// Scalar-generic DTW kernels on raw row-major buffers. The public API in
// warp_kernel.hpp wraps the double instantiation; the benchmark also uses
// the float one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace twdtw::detail {

/// Sum_k u_k |a_k - b_k|, accumulated in ascending k. A null `u` means
/// all-ones weights.
template <class Real>
inline Real cell_cost(const Real* u, const Real* a, const Real* b, std::size_t nf) {
  Real s = 0;
  if (u != nullptr) {
    for (std::size_t k = 0; k < nf; ++k) s += u[k] * std::abs(a[k] - b[k]);
  } else {
    for (std::size_t k = 0; k < nf; ++k) s += std::abs(a[k] - b[k]);
  }
  return s;
}

/// Row-major DP over the full n x m grid. `grid` receives cumulative costs.
template <class Real>
Real reference_fill(const Real* a, std::size_t n, const Real* b, std::size_t m,
                    const Real* u, std::size_t nf, bool allow_diagonal,
                    std::vector<Real>& grid) {
  constexpr Real inf = std::numeric_limits<Real>::infinity();
  grid.assign(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> Real& { return grid[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    const Real* ui = u != nullptr ? u + i * nf : nullptr;
    for (std::size_t j = 0; j < m; ++j) {
      const Real cost = cell_cost(ui, a + i * nf, b + j * nf, nf);
      if (i == 0 && j == 0) {
        at(0, 0) = cost;
        continue;
      }
      Real best = inf;
      if (i > 0) best = at(i - 1, j);
      if (j > 0) best = std::min(best, at(i, j - 1));
      if (allow_diagonal && i > 0 && j > 0) best = std::min(best, at(i - 1, j - 1));
      at(i, j) = best + cost;
    }
  }
  return at(n - 1, m - 1);
}

/// Anti-diagonal evaluation with two row-indexed buffers. Diagonal l holds
/// cells (t, l - t) for t in [max(0, l-m+1), min(n-1, l)]; each cell is a
/// kernel-2 / stride-1 min-pool over rows (t-1, t) of diagonal l-1 (absent
/// rows read as +inf) plus its own pointwise cost. Cells of one diagonal are
/// independent, so `parallel_cells` splits them across OpenMP threads.
template <class Real>
Real wavefront_distance(const Real* a, std::size_t n, const Real* b, std::size_t m,
                        const Real* u, std::size_t nf, bool parallel_cells) {
  constexpr Real inf = std::numeric_limits<Real>::infinity();
  std::vector<Real> prev(n, inf);
  std::vector<Real> cur(n, inf);
  prev[0] = cell_cost(u, a, b, nf);
  const std::size_t last = n + m - 2;
  const auto diag_count = static_cast<long>(last);

#pragma omp parallel if (parallel_cells && n > 1 && m > 1)
  for (long ll = 1; ll <= diag_count; ++ll) {
    const auto l = static_cast<std::size_t>(ll);
    const long start = static_cast<long>(l + 1 > m ? l + 1 - m : 0);
    const long end = static_cast<long>(std::min(n - 1, l));
#pragma omp for schedule(static)
    for (long tt = start; tt <= end; ++tt) {
      const auto t = static_cast<std::size_t>(tt);
      const Real up = t >= 1 ? prev[t - 1] : inf;
      const Real left = t + 1 <= l ? prev[t] : inf;
      const Real* ut = u != nullptr ? u + t * nf : nullptr;
      cur[t] = std::min(up, left) + cell_cost(ut, a + t * nf, b + (l - t) * nf, nf);
    }
#pragma omp single
    std::swap(prev, cur);
  }
  return prev[n - 1];
}

}  // namespace twdtw::detail
