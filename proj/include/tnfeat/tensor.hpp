#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace tnfeat::tensor {

using Matrix = Eigen::MatrixXd;
using Shape = std::vector<std::size_t>;

/// N-way dense tensor stored row-major (last index fastest). Values are
/// checked for finiteness on construction.
class DenseTensor {
 public:
  DenseTensor() = default;

  /// Zero tensor of the given shape.
  explicit DenseTensor(Shape shape);

  /// Throws InvalidInput on a non-positive dimension, a length mismatch or a
  /// non-finite value.
  DenseTensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const double> data() const noexcept { return data_; }

  double operator[](std::size_t linear) const { return data_[linear]; }
  double at(std::span<const std::size_t> index) const;

  double frobenius_norm() const noexcept;
  bool is_zero() const noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape) noexcept;

/// Mode-n matricization. Row i collects the entries whose mode-n index is
/// i; columns enumerate the remaining indices row-major in ascending mode
/// order. Throws InvalidMode.
Matrix unfold(const DenseTensor& t, std::size_t mode);

/// Inverse of unfold for the given target shape. Throws InvalidMode or
/// ShapeMismatch.
DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

/// Column-wise Kronecker product; row index of the result is i*J + j.
/// Throws ShapeMismatch when the column counts differ.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

}  // namespace tnfeat::tensor
