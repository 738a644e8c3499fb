#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "twdtw/tse.hpp"

using namespace twdtw;

TEST_CASE("validate_tse accepts well-formed input") {
  Matrix raw(3, 4, 0.5);
  const Tse t = validate_tse(raw, 4, "ok");
  CHECK(t.length() == 3);
  CHECK(t.features() == 4);
}

TEST_CASE("validate_tse rejects empty, mismatched and non-finite input") {
  SUBCASE("empty") {
    try {
      validate_tse(Matrix(0, 4), 4);
      FAIL("expected EmptySequence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptySequence);
    }
  }
  SUBCASE("width") {
    try {
      validate_tse(Matrix(3, 5), 4);
      FAIL("expected FeatureWidthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FeatureWidthMismatch);
    }
  }
  SUBCASE("nan reports its index") {
    Matrix raw(3, 4, 1.0);
    raw(2, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
      validate_tse(raw, 4, "x");
      FAIL("expected NonFiniteValue");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteValue);
      CHECK(std::string(e.what()).find("(2, 1)") != std::string::npos);
    }
  }
}

TEST_CASE("resample_linear midpoint and identity") {
  const Tse two{"t", 0, Matrix::from_rows({{0.0}, {2.0}})};
  const Tse three = resample_linear(two, 3);
  REQUIRE(three.length() == 3);
  CHECK(three.data(0, 0) == 0.0);
  CHECK(three.data(1, 0) == 1.0);
  CHECK(three.data(2, 0) == 2.0);

  std::mt19937_64 rng(3);
  const Tse t{"r", 1, oracle::random_matrix(rng, 6, 3)};
  CHECK(resample_linear(t, 6).data == t.data);
}

TEST_CASE("resample_linear matches straight-line interpolation oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tse t{"r", 0, oracle::random_matrix(rng, 5, 4)};
    const Tse r = resample_linear(t, 8);
    const Matrix expect = oracle::interpolate(t.data, 8);
    for (std::size_t k = 0; k < 8; ++k)
      for (std::size_t f = 0; f < 4; ++f) CHECK(std::fabs(r.data(k, f) - expect(k, f)) <= 1e-12);
    // Endpoints are exact.
    for (std::size_t f = 0; f < 4; ++f) {
      CHECK(r.data(0, f) == t.data(0, f));
      CHECK(r.data(7, f) == t.data(4, f));
    }
  }
}

TEST_CASE("resample_linear is exact on affine sequences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-3, 3);
  std::uniform_int_distribution<int> len(2, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = len(rng), L = len(rng), nf = 3;
    std::vector<double> v0(nf), dv(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      v0[f] = d(rng);
      dv[f] = d(rng);
    }
    Matrix x(T, nf);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t f = 0; f < nf; ++f) x(t, f) = v0[f] + t * dv[f];
    const Tse r = resample_linear(Tse{"a", 0, x}, L);
    for (std::size_t k = 0; k < L; ++k) {
      const double tau = static_cast<double>(k) * (T - 1) / (L - 1);
      for (std::size_t f = 0; f < nf; ++f) {
        const double expect = v0[f] + tau * dv[f];
        CHECK(oracle::rel_close(r.data(k, f), expect, 1e-12));
      }
    }
  }
}

TEST_CASE("resample_linear rejects zero target length") {
  const Tse t{"t", 0, Matrix(2, 2)};
  CHECK_THROWS_AS(resample_linear(t, 0), Error);
}

TEST_CASE("is_valid_path structural checks") {
  WarpingPath good{{{0, 0}, {1, 0}, {1, 1}, {2, 1}}};
  CHECK(is_valid_path(good, 3, 2));
  WarpingPath diag{{{0, 0}, {1, 1}, {2, 1}}};
  CHECK_FALSE(is_valid_path(diag, 3, 2));
  CHECK(is_valid_path(diag, 3, 2, true));
  WarpingPath skip{{{0, 0}, {2, 0}, {2, 1}}};
  CHECK_FALSE(is_valid_path(skip, 3, 2, true));
  WarpingPath bad_end{{{0, 0}, {1, 0}, {2, 0}}};
  CHECK_FALSE(is_valid_path(bad_end, 3, 2));
}

TEST_CASE("log weights clamp keeps exp finite and positive") {
  LogWeightSet lw{Tensor3(1, 2, 2, 0.0)};
  lw.log_data(0, 0, 0) = 1e6;
  lw.log_data(0, 1, 1) = -1e6;
  lw.clamp();
  const Tensor3 u = lw.weights();
  for (double v : u.values()) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
  CHECK(lw.log_data(0, 0, 0) == kLogWeightMax);
  CHECK(lw.log_data(0, 1, 1) == kLogWeightMin);
}
