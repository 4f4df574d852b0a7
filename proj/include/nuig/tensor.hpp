#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nuig/error.hpp"

namespace nuig {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

/// Dense row-major array of doubles. Shape dimensions are positive and every
/// element is finite when the tensor is constructed.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
    check_shape();
    if (!std::isfinite(fill)) fail(ErrorKind::domain, "tensor fill value is not finite");
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_numel(shape_)) {
      fail(ErrorKind::shape, "tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_to_string(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        fail(ErrorKind::domain, "tensor element " + std::to_string(i) + " is not finite");
      }
    }
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(Shape{n}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> values() const& noexcept { return data_; }
  std::span<double> values() & noexcept { return data_; }
  // a span into a temporary would dangle
  std::span<const double> values() const&& = delete;

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void check_shape() const {
    if (shape_.empty()) fail(ErrorKind::shape, "tensor shape must have at least one dimension");
    for (std::size_t d : shape_) {
      if (d == 0) fail(ErrorKind::shape, "tensor dimensions must be positive, got " + shape_to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<double> data_;
};

/// Bitwise equality, distinguishing -0.0 from 0.0 (unlike operator==).
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

/// Sequential left-to-right sum. Attribution code relies on this fixed order.
inline double ordered_sum(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace nuig
