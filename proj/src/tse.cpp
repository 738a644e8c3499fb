#include "twdtw/tse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace twdtw {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::FeatureWidthMismatch: return "FeatureWidthMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::PathShapeMismatch: return "PathShapeMismatch";
    case ErrorCode::DegenerateProbability: return "DegenerateProbability";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::TrailingData: return "TrailingData";
    case ErrorCode::HashMismatch: return "HashMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::ShapeMismatch, "matrix data size does not match shape");
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  Matrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw Error(ErrorCode::ShapeMismatch, "ragged rows");
    }
    std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
  }
  return out;
}

void Tensor3::set_slice(std::size_t c, const Matrix& m) {
  if (m.rows() != steps_ || m.cols() != features_) {
    throw Error(ErrorCode::ShapeMismatch, "slice shape mismatch");
  }
  std::copy(m.values().begin(), m.values().end(), mutable_slice(c).begin());
}

Tensor3 LogWeightSet::weights() const {
  Tensor3 u = log_data;
  for (double& v : u.values()) v = std::exp(v);
  return u;
}

void LogWeightSet::clamp() {
  for (double& v : log_data.values()) v = std::clamp(v, kLogWeightMin, kLogWeightMax);
}

bool is_valid_path(const WarpingPath& path, std::size_t n, std::size_t m,
                   bool allow_diagonal) {
  if (n == 0 || m == 0 || path.cells.empty()) return false;
  if (path.cells.front() != Cell{0, 0}) return false;
  if (path.cells.back() != Cell{n - 1, m - 1}) return false;
  if (!allow_diagonal && path.cells.size() != n + m - 1) return false;
  for (std::size_t k = 1; k < path.cells.size(); ++k) {
    const Cell& p = path.cells[k - 1];
    const Cell& q = path.cells[k];
    if (q.i < p.i || q.j < p.j) return false;
    const std::size_t di = q.i - p.i;
    const std::size_t dj = q.j - p.j;
    const bool unit = (di + dj == 1);
    const bool diag = allow_diagonal && di == 1 && dj == 1;
    if (!unit && !diag) return false;
  }
  return true;
}

Tse validate_tse(const Matrix& raw, std::size_t expected_nf, std::string id,
                 std::optional<int> label) {
  if (raw.rows() == 0) {
    throw Error(ErrorCode::EmptySequence, "sequence '" + id + "' has no timesteps");
  }
  if (raw.cols() == 0 || raw.cols() != expected_nf) {
    std::ostringstream msg;
    msg << "sequence '" << id << "' has " << raw.cols() << " features, expected "
        << expected_nf;
    throw Error(ErrorCode::FeatureWidthMismatch, msg.str());
  }
  for (std::size_t t = 0; t < raw.rows(); ++t) {
    for (std::size_t f = 0; f < raw.cols(); ++f) {
      if (!std::isfinite(raw(t, f))) {
        std::ostringstream msg;
        msg << "sequence '" << id << "' has non-finite value at (" << t << ", " << f
            << ")";
        throw Error(ErrorCode::NonFiniteValue, msg.str());
      }
    }
  }
  return Tse{std::move(id), label, raw};
}

Tse resample_linear(const Tse& t, std::size_t target_len) {
  if (target_len == 0) {
    throw Error(ErrorCode::InvalidArgument, "resample target length must be >= 1");
  }
  const std::size_t n = t.length();
  const std::size_t nf = t.features();
  if (n == 0) throw Error(ErrorCode::EmptySequence, "cannot resample empty sequence");

  Matrix out(target_len, nf);
  for (std::size_t k = 0; k < target_len; ++k) {
    if (k == 0 || n == 1) {
      std::copy_n(t.data.row(0).begin(), nf, out.row(k).begin());
      continue;
    }
    if (k + 1 == target_len) {
      std::copy_n(t.data.row(n - 1).begin(), nf, out.row(k).begin());
      continue;
    }
    const double pos = static_cast<double>(k) * static_cast<double>(n - 1) /
                       static_cast<double>(target_len - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), n - 2);
    const double frac = pos - static_cast<double>(lo);
    auto a = t.data.row(lo);
    auto b = t.data.row(lo + 1);
    auto dst = out.row(k);
    for (std::size_t f = 0; f < nf; ++f) dst[f] = a[f] + frac * (b[f] - a[f]);
  }
  return Tse{t.id, t.label, std::move(out)};
}

}  // namespace twdtw
