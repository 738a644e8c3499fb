#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace twdtw {

enum class ErrorCode {
  EmptySequence,
  FeatureWidthMismatch,
  NonFiniteValue,
  ShapeMismatch,
  PathShapeMismatch,
  DegenerateProbability,
  EmptyClass,
  NonFiniteLoss,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  TrailingData,
  HashMismatch,
  IoError,
  ManifestError,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. `code()` lets callers map failures to exit codes
/// without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Non-owning row-major view of a rows x cols block of doubles.
struct MatrixView {
  std::span<const double> data;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const {
    return data.subspan(i * cols, cols);
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
};

/// Owning row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }

  MatrixView view() const { return {data_, rows_, cols_}; }
  operator MatrixView() const { return view(); }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Owning dense tensor of shape classes x steps x features, used for
/// centroids, weights, gradients and optimizer moments alike.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t classes, std::size_t steps, std::size_t features,
          double fill = 0.0)
      : classes_(classes), steps_(steps), features_(features),
        data_(classes * steps * features, fill) {}

  std::size_t classes() const { return classes_; }
  std::size_t steps() const { return steps_; }
  std::size_t features() const { return features_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t c, std::size_t t, std::size_t f) {
    return data_[(c * steps_ + t) * features_ + f];
  }
  double operator()(std::size_t c, std::size_t t, std::size_t f) const {
    return data_[(c * steps_ + t) * features_ + f];
  }

  MatrixView slice(std::size_t c) const {
    return {std::span<const double>(data_).subspan(c * steps_ * features_,
                                                   steps_ * features_),
            steps_, features_};
  }
  std::span<double> mutable_slice(std::size_t c) {
    return std::span<double>(data_).subspan(c * steps_ * features_,
                                            steps_ * features_);
  }
  void set_slice(std::size_t c, const Matrix& m);

  bool same_shape(const Tensor3& o) const {
    return classes_ == o.classes_ && steps_ == o.steps_ && features_ == o.features_;
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t classes_ = 0;
  std::size_t steps_ = 0;
  std::size_t features_ = 0;
  std::vector<double> data_;
};

/// One temporal sequence of embeddings: T x N_f, optionally labelled.
struct Tse {
  std::string id;
  std::optional<int> label;
  Matrix data;

  std::size_t length() const { return data.rows(); }
  std::size_t features() const { return data.cols(); }
};

inline constexpr std::size_t kDefaultCentroidLength = 8;

/// Class centroids, N_c x T_c x N_f.
struct CentroidSet {
  Tensor3 data;
  std::size_t n_classes() const { return data.classes(); }
  std::size_t centroid_len() const { return data.steps(); }
};

inline constexpr double kLogWeightMin = -30.0;
inline constexpr double kLogWeightMax = 30.0;

/// Log-space weights; exp(log_data) is the positive weight tensor U.
struct LogWeightSet {
  Tensor3 log_data;

  Tensor3 weights() const;
  void clamp();
};

struct Cell {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Ordered alignment cells from (0,0) to (n-1, m-1).
struct WarpingPath {
  std::vector<Cell> cells;
  std::size_t size() const { return cells.size(); }
};

/// Structural check of path invariants for an n x m grid. Without diagonal
/// steps every path has exactly n+m-1 cells.
bool is_valid_path(const WarpingPath& path, std::size_t n, std::size_t m,
                   bool allow_diagonal = false);

Tse validate_tse(const Matrix& raw, std::size_t expected_nf,
                 std::string id = {}, std::optional<int> label = std::nullopt);

/// Piecewise-linear resampling along time to `target_len` rows; endpoints
/// are reproduced exactly.
Tse resample_linear(const Tse& t, std::size_t target_len);

}  // namespace twdtw
