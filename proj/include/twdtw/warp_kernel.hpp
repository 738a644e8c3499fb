#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "twdtw/tse.hpp"

namespace twdtw {

enum class Engine { Reference, Wavefront };

struct WarpOptions {
  Engine engine = Engine::Wavefront;
  /// Adds the (i-1, j-1) transition. Reference engine only.
  bool allow_diagonal = false;
};

/// Sum_k u_k |a_k - b_k|.
double dist_w_point(std::span<const double> u, std::span<const double> a,
                    std::span<const double> b);

/// Unweighted Manhattan distance between two rows.
double dist_point(std::span<const double> a, std::span<const double> b);

/// Cumulative cost grid of the row-major engine.
struct CostGrid {
  Matrix D;
};

struct ReferenceResult {
  double distance = 0.0;
  CostGrid grid;
};

/// Row-major DP. `u` holds one weight row per row of `a`; an empty view
/// (rows == 0) means unweighted.
ReferenceResult dtw_reference(MatrixView a, MatrixView b, MatrixView u = {},
                              bool allow_diagonal = false);

/// Cumulative costs of one anti-diagonal l: cells (t, l - t) for t in
/// [start, end].
struct DiagonalState {
  std::size_t l = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<double> values;

  std::size_t length() const { return end - start + 1; }
};

struct WavefrontResult {
  double distance = 0.0;
  std::vector<DiagonalState> diagonals;
};

/// Anti-diagonal engine that keeps every diagonal, for path extraction.
/// No diagonal transition.
WavefrontResult dtw_wavefront(MatrixView a, MatrixView b, MatrixView u = {});

/// Distance-only anti-diagonal engine with O(n) memory.
double wavefront_distance(MatrixView a, MatrixView b, MatrixView u = {},
                          bool parallel_cells = false);

/// Backtracks from (n-1, m-1). Ties between predecessors resolve toward
/// (i, j-1), then (i-1, j), then (i-1, j-1), so the forward path moves down
/// the first sequence as early as possible.
WarpingPath extract_path(const CostGrid& grid, bool allow_diagonal = false);
WarpingPath extract_path(const std::vector<DiagonalState>& diagonals, std::size_t n,
                         std::size_t m);

/// Sum of pointwise weighted costs along a fixed path.
double path_cost(const WarpingPath& path, MatrixView a, MatrixView b,
                 MatrixView u = {});

/// Per-step slope and intercept accumulated along one path so that
/// sum(U * (C * slope + intercept)) equals the weighted path cost.
struct PathDecomposition {
  Matrix slope;
  Matrix intercept;
};

PathDecomposition decompose_path(const WarpingPath& path, MatrixView centroid,
                                 MatrixView sample);

/// sum_{t,f} u[t][f] * (c[t][f] * slope[t][f] + intercept[t][f])
double reconstruct_distance(const PathDecomposition& dec, MatrixView u,
                            MatrixView centroid);

struct Alignment {
  double distance = 0.0;
  WarpingPath path;
};

/// Distance plus optimal path of `a` against `b` with the chosen engine.
Alignment align(MatrixView a, MatrixView b, MatrixView u = {},
                const WarpOptions& opts = {});

/// z[s][c] = D_w(U_c, C_c, sample_s) for every sample and class, computed in
/// parallel over (sample, class) pairs. `weights` may be empty (unweighted).
Matrix batch_distances(std::span<const Tse> samples, const CentroidSet& centroids,
                       const Tensor3& weights, const WarpOptions& opts = {});

}  // namespace twdtw
