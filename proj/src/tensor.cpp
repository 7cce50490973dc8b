#include "tnfeat/tensor.hpp"

#include "tnfeat/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tnfeat::tensor {

std::size_t element_count(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw Error(Errc::InvalidInput, "tensor needs at least one mode");
  for (std::size_t d : shape) {
    if (d == 0) throw Error(Errc::InvalidInput, "tensor dimensions must be positive");
  }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t n = shape.size(); n-- > 1;) strides[n - 1] = strides[n] * shape[n];
  return strides;
}

}  // namespace

DenseTensor::DenseTensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(element_count(shape_), 0.0);
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != element_count(shape_)) {
    throw Error(Errc::InvalidInput, "data length " + std::to_string(data_.size()) + " does not match shape product " +
                                        std::to_string(element_count(shape_)));
  }
  if (!std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(Errc::InvalidInput, "tensor contains non-finite values");
  }
}

double DenseTensor::at(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw Error(Errc::ShapeMismatch, "index arity does not match tensor order");
  std::size_t linear = 0;
  for (std::size_t n = 0; n < shape_.size(); ++n) {
    if (index[n] >= shape_[n]) throw Error(Errc::InvalidInput, "index out of range");
    linear = linear * shape_[n] + index[n];
  }
  return data_[linear];
}

double DenseTensor::frobenius_norm() const noexcept {
  double sum = 0.0;
  for (double v : data_) sum += v * v;
  return std::sqrt(sum);
}

bool DenseTensor::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  const Shape& shape = t.shape();
  if (mode >= shape.size()) {
    throw Error(Errc::InvalidMode, "mode " + std::to_string(mode) + " out of range for order " + std::to_string(shape.size()));
  }
  const std::size_t rows = shape[mode];
  const std::size_t cols = t.size() / rows;
  // Row-major layout splits as (outer, mode, inner); the column index of the
  // unfolding is outer * inner_size + inner.
  std::size_t inner = 1;
  for (std::size_t n = mode + 1; n < shape.size(); ++n) inner *= shape[n];
  const std::size_t outer = cols / inner;

  Matrix m(rows, cols);
  const auto data = t.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* src = data.data() + (o * rows + i) * inner;
      for (std::size_t k = 0; k < inner; ++k) m(i, o * inner + k) = src[k];
    }
  }
  return m;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
  if (mode >= shape.size()) throw Error(Errc::InvalidMode, "mode out of range");
  const std::size_t total = element_count(shape);
  if (static_cast<std::size_t>(m.rows()) != shape[mode] || static_cast<std::size_t>(m.rows() * m.cols()) != total) {
    throw Error(Errc::ShapeMismatch, "matrix does not match the target shape");
  }
  const std::size_t rows = shape[mode];
  std::size_t inner = 1;
  for (std::size_t n = mode + 1; n < shape.size(); ++n) inner *= shape[n];
  const std::size_t outer = total / rows / inner;

  std::vector<double> data(total);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < rows; ++i) {
      double* dst = data.data() + (o * rows + i) * inner;
      for (std::size_t k = 0; k < inner; ++k) dst[k] = m(i, o * inner + k);
    }
  }
  return DenseTensor(shape, std::move(data));
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(Errc::ShapeMismatch,
                "khatri_rao column mismatch: " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  }
  const Eigen::Index rows_b = b.rows();
  Matrix out(a.rows() * rows_b, a.cols());
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.col(r).segment(i * rows_b, rows_b) = a(i, r) * b.col(r);
    }
  }
  return out;
}

}  // namespace tnfeat::tensor
