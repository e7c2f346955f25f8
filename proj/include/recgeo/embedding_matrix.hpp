#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace recgeo {

using Index = Eigen::Index;
using ItemId = std::int64_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense per-item vectors, one row per item. Values are always finite.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(Index rows, Index cols);

  /// Throws ValidationError if any value is NaN or infinite.
  explicit EmbeddingMatrix(Matrix values);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  double operator()(Index r, Index c) const { return values_(r, c); }

  Vector row_norms() const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    return a.values_.rows() == b.values_.rows() &&
           a.values_.cols() == b.values_.cols() && a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

}  // namespace recgeo
