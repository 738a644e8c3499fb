#include "twdtw/warp_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "twdtw/detail/kernels.hpp"

namespace twdtw {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const double* weight_ptr(MatrixView u) {
  return u.rows == 0 ? nullptr : u.data.data();
}

void check_shapes(MatrixView a, MatrixView b, MatrixView u) {
  if (a.rows == 0 || b.rows == 0) {
    throw Error(ErrorCode::EmptySequence, "cannot warp an empty sequence");
  }
  if (a.cols != b.cols) {
    std::ostringstream msg;
    msg << "feature width " << a.cols << " vs " << b.cols;
    throw Error(ErrorCode::ShapeMismatch, msg.str());
  }
  if (u.rows != 0 && (u.rows != a.rows || u.cols != a.cols)) {
    throw Error(ErrorCode::ShapeMismatch, "weight shape must match first sequence");
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

template <class Lookup>
WarpingPath backtrack(std::size_t n, std::size_t m, bool allow_diagonal,
                      Lookup&& cost_at) {
  WarpingPath path;
  path.cells.reserve(n + m - 1);
  std::size_t i = n - 1;
  std::size_t j = m - 1;
  path.cells.push_back({i, j});
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double left = cost_at(i, j - 1);
      const double up = cost_at(i - 1, j);
      double best = left;
      int choice = 0;
      if (up < best) {
        best = up;
        choice = 1;
      }
      if (allow_diagonal && cost_at(i - 1, j - 1) < best) choice = 2;
      if (choice == 0) {
        --j;
      } else if (choice == 1) {
        --i;
      } else {
        --i;
        --j;
      }
    }
    path.cells.push_back({i, j});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

}  // namespace

double dist_w_point(std::span<const double> u, std::span<const double> a,
                    std::span<const double> b) {
  return detail::cell_cost(u.data(), a.data(), b.data(), a.size());
}

double dist_point(std::span<const double> a, std::span<const double> b) {
  return detail::cell_cost<double>(nullptr, a.data(), b.data(), a.size());
}

ReferenceResult dtw_reference(MatrixView a, MatrixView b, MatrixView u,
                              bool allow_diagonal) {
  check_shapes(a, b, u);
  std::vector<double> grid;
  const double d = detail::reference_fill(a.data.data(), a.rows, b.data.data(), b.rows,
                                          weight_ptr(u), a.cols, allow_diagonal, grid);
  return {d, CostGrid{Matrix(a.rows, b.rows, std::move(grid))}};
}

WavefrontResult dtw_wavefront(MatrixView a, MatrixView b, MatrixView u) {
  check_shapes(a, b, u);
  const std::size_t n = a.rows;
  const std::size_t m = b.rows;
  const std::size_t nf = a.cols;
  const double* uw = weight_ptr(u);

  WavefrontResult out;
  out.diagonals.reserve(n + m - 1);
  out.diagonals.push_back(
      {0, 0, 0, {detail::cell_cost(uw, a.row(0).data(), b.row(0).data(), nf)}});

  for (std::size_t l = 1; l <= n + m - 2; ++l) {
    const DiagonalState& prev = out.diagonals.back();
    DiagonalState cur;
    cur.l = l;
    cur.start = l + 1 > m ? l + 1 - m : 0;
    cur.end = std::min(n - 1, l);
    cur.values.resize(cur.length());
    // Min-pool over the previous diagonal, addressed by absolute row so the
    // window stays aligned once `start` begins to advance.
    auto prev_at = [&](std::size_t row) {
      return (row >= prev.start && row <= prev.end) ? prev.values[row - prev.start]
                                                    : kInf;
    };
    for (std::size_t t = cur.start; t <= cur.end; ++t) {
      const double up = t >= 1 ? prev_at(t - 1) : kInf;
      const double left = prev_at(t);
      const double* ut = uw != nullptr ? uw + t * nf : nullptr;
      cur.values[t - cur.start] =
          std::min(up, left) +
          detail::cell_cost(ut, a.row(t).data(), b.row(l - t).data(), nf);
    }
    out.diagonals.push_back(std::move(cur));
  }
  out.distance = out.diagonals.back().values.front();
  return out;
}

double wavefront_distance(MatrixView a, MatrixView b, MatrixView u,
                          bool parallel_cells) {
  check_shapes(a, b, u);
  return detail::wavefront_distance(a.data.data(), a.rows, b.data.data(), b.rows,
                                    weight_ptr(u), a.cols, parallel_cells);
}

WarpingPath extract_path(const CostGrid& grid, bool allow_diagonal) {
  const Matrix& D = grid.D;
  return backtrack(D.rows(), D.cols(), allow_diagonal,
                   [&](std::size_t i, std::size_t j) { return D(i, j); });
}

WarpingPath extract_path(const std::vector<DiagonalState>& diagonals, std::size_t n,
                         std::size_t m) {
  if (diagonals.size() != n + m - 1) {
    throw Error(ErrorCode::ShapeMismatch, "diagonal count does not match n + m - 1");
  }
  return backtrack(n, m, false, [&](std::size_t i, std::size_t j) {
    const DiagonalState& d = diagonals[i + j];
    return d.values[i - d.start];
  });
}

double path_cost(const WarpingPath& path, MatrixView a, MatrixView b, MatrixView u) {
  check_shapes(a, b, u);
  const double* uw = weight_ptr(u);
  double total = 0.0;
  for (const Cell& c : path.cells) {
    if (c.i >= a.rows || c.j >= b.rows) {
      throw Error(ErrorCode::PathShapeMismatch, "path cell outside grid");
    }
    const double* ui = uw != nullptr ? uw + c.i * a.cols : nullptr;
    total += detail::cell_cost(ui, a.row(c.i).data(), b.row(c.j).data(), a.cols);
  }
  return total;
}

PathDecomposition decompose_path(const WarpingPath& path, MatrixView centroid,
                                 MatrixView sample) {
  if (!is_valid_path(path, centroid.rows, sample.rows, true) ||
      centroid.cols != sample.cols) {
    throw Error(ErrorCode::PathShapeMismatch,
                "path does not fit centroid/sample shapes");
  }
  const std::size_t nf = centroid.cols;
  PathDecomposition dec{Matrix(centroid.rows, nf), Matrix(centroid.rows, nf)};
  for (const Cell& cell : path.cells) {
    auto c = centroid.row(cell.i);
    auto s = sample.row(cell.j);
    auto slope = dec.slope.row(cell.i);
    auto icpt = dec.intercept.row(cell.i);
    for (std::size_t f = 0; f < nf; ++f) {
      const double sg = sign(c[f] - s[f]);
      slope[f] += sg;
      icpt[f] -= sg * s[f];
    }
  }
  return dec;
}

double reconstruct_distance(const PathDecomposition& dec, MatrixView u,
                            MatrixView centroid) {
  double total = 0.0;
  for (std::size_t t = 0; t < centroid.rows; ++t) {
    for (std::size_t f = 0; f < centroid.cols; ++f) {
      const double w = u.rows == 0 ? 1.0 : u(t, f);
      total += w * (centroid(t, f) * dec.slope(t, f) + dec.intercept(t, f));
    }
  }
  return total;
}

Alignment align(MatrixView a, MatrixView b, MatrixView u, const WarpOptions& opts) {
  if (opts.engine == Engine::Wavefront) {
    if (opts.allow_diagonal) {
      throw Error(ErrorCode::InvalidArgument,
                  "diagonal transitions require the reference engine");
    }
    WavefrontResult r = dtw_wavefront(a, b, u);
    return {r.distance, extract_path(r.diagonals, a.rows, b.rows)};
  }
  ReferenceResult r = dtw_reference(a, b, u, opts.allow_diagonal);
  return {r.distance, extract_path(r.grid, opts.allow_diagonal)};
}

Matrix batch_distances(std::span<const Tse> samples, const CentroidSet& centroids,
                       const Tensor3& weights, const WarpOptions& opts) {
  const std::size_t n_classes = centroids.n_classes();
  Matrix z(samples.size(), n_classes);
  if (samples.empty()) return z;
  if (opts.engine == Engine::Wavefront && opts.allow_diagonal) {
    throw Error(ErrorCode::InvalidArgument,
                "diagonal transitions require the reference engine");
  }
  const bool weighted = weights.size() != 0;
  if (weighted && !weights.same_shape(centroids.data)) {
    throw Error(ErrorCode::ShapeMismatch, "weights and centroids differ in shape");
  }
  for (const Tse& s : samples) {
    if (s.length() == 0 || s.features() != centroids.data.features()) {
      std::ostringstream msg;
      msg << "sample '" << s.id << "' has shape " << s.length() << "x" << s.features()
          << ", centroids have " << centroids.data.features() << " features";
      throw Error(ErrorCode::ShapeMismatch, msg.str());
    }
  }

  const auto pairs = static_cast<long>(samples.size() * n_classes);
#pragma omp parallel for schedule(dynamic)
  for (long p = 0; p < pairs; ++p) {
    const auto s = static_cast<std::size_t>(p) / n_classes;
    const auto c = static_cast<std::size_t>(p) % n_classes;
    const MatrixView u = weighted ? weights.slice(c) : MatrixView{};
    const MatrixView cen = centroids.data.slice(c);
    const MatrixView smp = samples[s].data.view();
    z(s, c) = opts.engine == Engine::Wavefront
                  ? wavefront_distance(cen, smp, u)
                  : dtw_reference(cen, smp, u, opts.allow_diagonal).distance;
  }
  return z;
}

}  // namespace twdtw
