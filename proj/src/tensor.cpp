#include "distillnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distillnn/errors.hpp"

namespace distillnn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

std::span<double> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), 0.0); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view what) const {
  if (!all_finite()) throw NumericError(std::string(what) + ": non-finite value");
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows()) throw DimensionError("row slice out of range");
  std::vector<std::size_t> shape = shape_;
  shape[0] = end - begin;
  const std::size_t c = cols();
  return Tensor(std::move(shape), std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                                      data_.begin() + static_cast<std::ptrdiff_t>(end * c)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> shape = shape_;
  shape[0] = indices.size();
  Tensor out(std::move(shape));
  const std::size_t c = cols();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows()) throw DimensionError("gather index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * c), c,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return out;
}

Tensor Tensor::slice_cols(std::size_t begin, std::size_t end) const {
  if (rank() != 2) throw DimensionError("slice_cols needs a rank-2 tensor, got " + shape_string());
  if (begin > end || end > shape_[1]) throw DimensionError("column slice out of range");
  Tensor out({shape_[0], end - begin});
  for (std::size_t r = 0; r < shape_[0]; ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
  return out;
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

Tensor concat_cols(const Tensor& left, const Tensor& right) {
  if (left.rank() != 2 || right.rank() != 2 || left.rows() != right.rows())
    throw DimensionError("concat_cols: incompatible shapes " + left.shape_string() + " and " +
                         right.shape_string());
  const std::size_t n = left.rows(), a = left.cols(), b = right.cols();
  Tensor out({n, a + b});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < a; ++c) out(r, c) = left(r, c);
    for (std::size_t c = 0; c < b; ++c) out(r, a + c) = right(r, c);
  }
  return out;
}

}  // namespace distillnn
