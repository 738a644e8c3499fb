#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "twdtw/warp_kernel.hpp"

using namespace twdtw;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  std::size_t i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

std::vector<Cell> cells(std::initializer_list<std::pair<std::size_t, std::size_t>> v) {
  std::vector<Cell> out;
  for (auto [i, j] : v) out.push_back({i, j});
  return out;
}

const Matrix kA = col({0, 1, 2});
const Matrix kB = col({0, 2});

}  // namespace

TEST_CASE("dist_w_point by definition") {
  const std::vector<double> a{1, 2}, b{3, 0};
  CHECK(dist_w_point(std::vector<double>{1, 1}, a, b) == 4.0);
  CHECK(dist_w_point(std::vector<double>{2, 1}, a, b) == 6.0);
  CHECK(dist_point(a, b) == 4.0);
}

TEST_CASE("dist_w_point matches scalar loop on wide rows") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix u = oracle::random_matrix(rng, 1, 1408, 0.1, 2.0);
    const Matrix a = oracle::random_matrix(rng, 1, 1408);
    const Matrix b = oracle::random_matrix(rng, 1, 1408);
    double expect = 0.0;
    for (std::size_t k = 0; k < 1408; ++k) expect += u(0, k) * std::fabs(a(0, k) - b(0, k));
    CHECK(oracle::rel_close(dist_w_point(u.row(0), a.row(0), b.row(0)), expect, 1e-10));
  }
}

TEST_CASE("dtw_reference small fixtures") {
  const Matrix one = col({3.5});
  CHECK(dtw_reference(one, one).distance == 0.0);

  const auto plain = dtw_reference(kA, kB);
  CHECK(plain.distance == doctest::Approx(oracle::enumerate_paths(kA, kB, {}, false).cost));
  CHECK(plain.distance == 2.0);

  const Matrix u = col({1, 2, 1});
  const auto weighted = dtw_reference(kA, kB, u);
  CHECK(weighted.distance == doctest::Approx(oracle::enumerate_paths(kA, kB, u, false).cost));
  CHECK(weighted.distance == 4.0);
}

TEST_CASE("dtw_reference with diagonal matches diagonal path oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 6, 3);
    const Matrix b = oracle::random_matrix(rng, 5, 3);
    const Matrix u = oracle::random_matrix(rng, 6, 3, 0.2, 2.0);
    const double expect = oracle::enumerate_paths(a, b, u, true).cost;
    CHECK(oracle::rel_close(dtw_reference(a, b, u, true).distance, expect, 1e-9));
  }
}

TEST_CASE("dtw_reference rejects mismatched shapes") {
  CHECK_THROWS_AS(dtw_reference(Matrix(3, 2), Matrix(3, 3)), Error);
  CHECK_THROWS_AS(dtw_reference(Matrix(3, 2), Matrix(3, 2), Matrix(2, 2, 1.0)), Error);
}

TEST_CASE("dtw_wavefront fixture and diagonal lengths") {
  const WavefrontResult r = dtw_wavefront(kA, kB);
  CHECK(r.distance == 2.0);
  REQUIRE(r.diagonals.size() == 4);
  const std::size_t lengths[] = {1, 2, 2, 1};
  for (std::size_t l = 0; l < 4; ++l) {
    CHECK(r.diagonals[l].length() == lengths[l]);
    CHECK(r.diagonals[l].values.size() == lengths[l]);
  }
}

TEST_CASE("dtw_wavefront single-row grid sums every column") {
  std::mt19937_64 rng(4);
  const Matrix a = oracle::random_matrix(rng, 1, 3);
  const Matrix b = oracle::random_matrix(rng, 5, 3);
  const Matrix u = oracle::random_matrix(rng, 1, 3, 0.5, 1.5);
  double expect = 0.0;
  for (std::size_t j = 0; j < 5; ++j) expect += oracle::naive_cost(u, a, b, 0, j);
  const WavefrontResult r = dtw_wavefront(a, b, u);
  CHECK(oracle::rel_close(r.distance, expect, 1e-12));
  for (const auto& d : r.diagonals) CHECK(d.length() == 1);
}

TEST_CASE("engines agree on random instances") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> len(2, 12), width(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng), m = len(rng), nf = width(rng);
    const Matrix a = oracle::random_matrix(rng, n, nf);
    const Matrix b = oracle::random_matrix(rng, m, nf);
    const Matrix u = oracle::random_matrix(rng, n, nf, 0.1, 3.0);
    const double ref = dtw_reference(a, b, u).distance;
    CHECK(std::fabs(dtw_wavefront(a, b, u).distance - ref) <= 1e-9 * std::max(1.0, ref));
    CHECK(std::fabs(wavefront_distance(a, b, u) - ref) <= 1e-9 * std::max(1.0, ref));
    CHECK(std::fabs(wavefront_distance(a, b, u, true) - ref) <= 1e-9 * std::max(1.0, ref));
  }
}

TEST_CASE("both engines equal the exhaustive path oracle") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  int checked = 0;
  while (checked < 150) {
    const std::size_t n = len(rng), m = len(rng);
    if (n + m > 16) continue;
    const Matrix a = oracle::random_matrix(rng, n, 3);
    const Matrix b = oracle::random_matrix(rng, m, 3);
    const Matrix u = oracle::random_matrix(rng, n, 3, 0.1, 2.0);
    const oracle::BestPath best = oracle::enumerate_paths(a, b, u, false);
    CHECK(oracle::rel_close(dtw_reference(a, b, u).distance, best.cost, 1e-9));
    CHECK(oracle::rel_close(dtw_wavefront(a, b, u).distance, best.cost, 1e-9));
    ++checked;
  }
}

TEST_CASE("extract_path fixtures") {
  const auto expect = cells({{0, 0}, {1, 0}, {1, 1}, {2, 1}});
  CHECK(extract_path(dtw_reference(kA, kB).grid).cells == expect);
  CHECK(extract_path(dtw_wavefront(kA, kB).diagonals, 3, 2).cells == expect);
  CHECK(oracle::enumerate_paths(kA, kB, {}, false).cells == expect);

  const Matrix one = col({1.0});
  const Matrix four = col({0, 1, 2, 3});
  CHECK(extract_path(dtw_reference(one, four).grid).cells ==
        cells({{0, 0}, {0, 1}, {0, 2}, {0, 3}}));
}

TEST_CASE("extract_path tie-break on a flat cost surface") {
  // Every pointwise cost is 1, so all predecessor comparisons tie.
  const std::size_t n = 4, m = 3;
  const Matrix a(n, 1, 0.0);
  const Matrix b(m, 1, 1.0);
  std::vector<Cell> expect;
  for (std::size_t i = 0; i < n; ++i) expect.push_back({i, 0});
  for (std::size_t j = 1; j < m; ++j) expect.push_back({n - 1, j});
  CHECK(extract_path(dtw_reference(a, b).grid).cells == expect);
  CHECK(extract_path(dtw_wavefront(a, b).diagonals, n, m).cells == expect);
}

TEST_CASE("extracted paths satisfy invariants and match the unique optimum") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len(rng), m = len(rng);
    const Matrix a = oracle::random_matrix(rng, n, 2);
    const Matrix b = oracle::random_matrix(rng, m, 2);
    const Matrix u = oracle::random_matrix(rng, n, 2, 0.1, 2.0);
    const WarpingPath pr = extract_path(dtw_reference(a, b, u).grid);
    const WarpingPath pw = extract_path(dtw_wavefront(a, b, u).diagonals, n, m);
    CHECK(is_valid_path(pr, n, m));
    CHECK(pr.size() == n + m - 1);
    CHECK(pw.cells == pr.cells);
    const oracle::BestPath best = oracle::enumerate_paths(a, b, u, false);
    if (best.optimal_count == 1) CHECK(pr.cells == best.cells);
    CHECK(oracle::rel_close(path_cost(pr, a, b, u), best.cost, 1e-9));
  }
}

TEST_CASE("diagonal mode paths are valid and cost the distance") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 6, 2);
    const Matrix b = oracle::random_matrix(rng, 7, 2);
    const ReferenceResult r = dtw_reference(a, b, {}, true);
    const WarpingPath p = extract_path(r.grid, true);
    CHECK(is_valid_path(p, 6, 7, true));
    CHECK(oracle::rel_close(path_cost(p, a, b), r.distance, 1e-12));
  }
}

TEST_CASE("decompose_path single cell and zero sign") {
  const Matrix c = col({5.0});
  const Matrix s = col({3.0});
  const WarpingPath p{{{0, 0}}};
  const PathDecomposition dec = decompose_path(p, c, s);
  CHECK(dec.slope(0, 0) == 1.0);
  CHECK(dec.intercept(0, 0) == -3.0);
  const Matrix u = col({2.0});
  CHECK(reconstruct_distance(dec, u, c) == 4.0);

  const PathDecomposition zero = decompose_path(p, c, col({5.0}));
  CHECK(zero.slope(0, 0) == 0.0);
  CHECK(zero.intercept(0, 0) == 0.0);
}

TEST_CASE("decompose_path reconstructs the weighted distance") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c = oracle::random_matrix(rng, 8, 16);
    const Matrix s = oracle::random_matrix(rng, 12, 16);
    const Matrix u = oracle::random_matrix(rng, 8, 16, 0.1, 3.0);
    const ReferenceResult r = dtw_reference(c, s, u);
    const WarpingPath p = extract_path(r.grid);
    const PathDecomposition dec = decompose_path(p, c, s);
    CHECK(oracle::rel_close(reconstruct_distance(dec, u, c), r.distance, 1e-9));
    // |slope| is bounded by the number of sample steps aligned to each row.
    std::vector<double> aligned(8, 0.0);
    for (const Cell& cell : p.cells) aligned[cell.i] += 1.0;
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t f = 0; f < 16; ++f) CHECK(std::fabs(dec.slope(t, f)) <= aligned[t]);
  }
}

TEST_CASE("decompose_path rejects a path that does not fit") {
  const WarpingPath p{{{0, 0}, {1, 0}}};
  CHECK_THROWS_AS(decompose_path(p, Matrix(1, 2), Matrix(1, 2)), Error);
}

TEST_CASE("weight monotonicity along a fixed path") {
  std::mt19937_64 rng(10);
  const Matrix c = oracle::random_matrix(rng, 8, 4);
  const Matrix s = oracle::random_matrix(rng, 10, 4);
  Matrix u = oracle::random_matrix(rng, 8, 4, 0.5, 1.5);
  const WarpingPath p = extract_path(dtw_reference(c, s, u).grid);
  const double before = path_cost(p, c, s, u);
  const Cell cell = p.cells[p.size() / 2];
  u(cell.i, 1) += 0.25;
  CHECK(path_cost(p, c, s, u) > before);
}

TEST_CASE("weighted warp distance is not symmetric") {
  const Matrix u = col({1, 2, 1});
  const double forward = dtw_reference(kA, kB, u).distance;
  const double backward = dtw_reference(kB, kA, Matrix(2, 1, 1.0)).distance;
  CHECK(forward == 4.0);
  CHECK(backward == 2.0);
  CHECK(forward != backward);
}

TEST_CASE("self distance bounds") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 6, 3);
    // Alternating staircase (0,0),(1,0),(1,1),(2,1),...: costs |a_{i} - a_{i-1}|.
    double alternating = 0.0;
    for (std::size_t i = 1; i < 6; ++i) alternating += oracle::naive_cost({}, a, a, i, i - 1);
    CHECK(dtw_reference(a, a).distance <= alternating + 1e-12);
  }
  const Matrix single = oracle::random_matrix(rng, 1, 5);
  CHECK(dtw_reference(single, single).distance == 0.0);
}

TEST_CASE("ones weights reproduce the unweighted distance bitwise") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = oracle::random_matrix(rng, 7, 5);
    const Matrix b = oracle::random_matrix(rng, 9, 5);
    const Matrix ones(7, 5, 1.0);
    CHECK(dtw_reference(a, b, ones).distance == dtw_reference(a, b).distance);
    CHECK(wavefront_distance(a, b, ones) == wavefront_distance(a, b));
  }
}

TEST_CASE("align rejects diagonal transitions on the wavefront engine") {
  try {
    align(kA, kB, {}, {Engine::Wavefront, true});
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("batch_distances") {
  std::mt19937_64 rng(14);
  CentroidSet cs{Tensor3(2, 4, 3)};
  const Matrix c0 = oracle::random_matrix(rng, 4, 3);
  const Matrix c1 = oracle::random_matrix(rng, 4, 3, 5.0, 6.0);
  cs.data.set_slice(0, c0);
  cs.data.set_slice(1, c1);

  SUBCASE("identical sample has zero distance to its centroid") {
    // Without the diagonal move a staircase path also pairs neighbouring
    // rows, so the centroid is constant in time here.
    Matrix flat(4, 3);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t f = 0; f < 3; ++f) flat(t, f) = c0(0, f);
    cs.data.set_slice(0, flat);
    const std::vector<Tse> samples{{"s", 0, flat}};
    const Matrix z = batch_distances(samples, cs, Tensor3(2, 4, 3, 1.0));
    CHECK(z(0, 0) == 0.0);
    CHECK(z(0, 1) >= 0.0);
  }
  SUBCASE("matches a loop over dtw_reference") {
    Tensor3 w(2, 4, 3);
    for (double& v : w.values()) v = std::uniform_real_distribution<double>(0.2, 2)(rng);
    std::vector<Tse> samples;
    for (int s = 0; s < 3; ++s) samples.push_back({"s", 0, oracle::random_matrix(rng, 5 + s, 3)});
    const Matrix z = batch_distances(samples, cs, w);
    const Matrix zr = batch_distances(samples, cs, w, {Engine::Reference, false});
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 2; ++c) {
        const double ref = dtw_reference(cs.data.slice(c), samples[s].data, w.slice(c)).distance;
        CHECK(oracle::rel_close(z(s, c), ref, 1e-9));
        CHECK(zr(s, c) == ref);
      }
  }
  SUBCASE("empty sample list") {
    const Matrix z = batch_distances({}, cs, Tensor3());
    CHECK(z.rows() == 0);
  }
  SUBCASE("shape errors name the sample") {
    const std::vector<Tse> samples{{"wide", 0, Matrix(4, 5)}};
    try {
      batch_distances(samples, cs, Tensor3());
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ShapeMismatch);
      CHECK(std::string(e.what()).find("wide") != std::string::npos);
    }
  }
}
