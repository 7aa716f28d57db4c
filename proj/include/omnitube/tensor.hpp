#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "omnitube/error.hpp"

namespace omnitube {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major real tensor. Most kernels view it as a matrix of
/// `rows()` vectors of width `cols()` (the last extent), i.e. [...xD].
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_shape();
    data_.assign(product(), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    require(data_.size() == product(), ErrorKind::shape_mismatch,
            "data length " + std::to_string(data_.size()) + " vs shape " + shape_string(shape_));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{rows, cols}, fill);
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t rows() const { return cols() == 0 ? 0 : data_.size() / cols(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Same data, new shape with identical element count.
  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t product() const {
    return std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  }
  void check_shape() const {
    require(!shape_.empty(), ErrorKind::shape_mismatch, "tensor needs at least one extent");
    for (auto e : shape_) require(e > 0, ErrorKind::shape_mismatch, "zero extent in " + shape_string(shape_));
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Copies the listed rows of `src` into a new [indices.size() x cols] matrix.
inline Tensor gather_rows(const Tensor& src, std::span<const std::size_t> indices) {
  Tensor out = Tensor::matrix(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto from = src.row(indices[i]);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return out;
}

inline void scatter_rows(const Tensor& src, std::span<const std::size_t> indices, Tensor& dst) {
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto from = src.row(i);
    std::copy(from.begin(), from.end(), dst.row(indices[i]).begin());
  }
}

/// Stacks matrices with equal widths vertically.
inline Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), ErrorKind::empty_input, "concat of zero tensors");
  std::size_t rows = 0;
  const std::size_t cols = parts.front().cols();
  for (const auto& p : parts) {
    require(p.cols() == cols, ErrorKind::shape_mismatch, "concat width mismatch");
    rows += p.rows();
  }
  Tensor out = Tensor::matrix(rows, cols);
  auto it = out.data().begin();
  for (const auto& p : parts) it = std::copy(p.data().begin(), p.data().end(), it);
  return out;
}

inline Tensor slice_rows(const Tensor& src, std::size_t begin, std::size_t count) {
  Tensor out = Tensor::matrix(count, src.cols());
  std::copy_n(src.data().begin() + static_cast<std::ptrdiff_t>(begin * src.cols()), count * src.cols(),
              out.data().begin());
  return out;
}

}  // namespace omnitube
