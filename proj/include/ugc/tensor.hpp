// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ugc/error.hpp"

namespace ugc {

using Shape = std::vector<std::size_t>;

std::size_t shape_product(const Shape& shape) noexcept;
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles (last axis fastest). No broadcasting anywhere:
/// every binary operation requires exactly matching extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor identity(std::size_t n);
  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty() && shape_.empty(); }
  std::size_t extent(std::size_t axis) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t flat) const noexcept { return data_[flat]; }
  double& operator[](std::size_t flat) noexcept { return data_[flat]; }

  /// Multi-index access with bounds checking.
  double at(std::initializer_list<std::size_t> index) const;
  double& at(std::initializer_list<std::size_t> index);
  std::size_t flat_index(std::span<const std::size_t> index) const;

  /// Row-major strides in elements.
  std::vector<std::size_t> strides() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Reinterpret `x` with a new shape; element order is untouched.
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor reshape(Tensor&& x, Shape new_shape);

Tensor elemwise_mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// Rank-2 product. Each output entry sums over the inner index in ascending order.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Reorder axes: output axis i is input axis perm[i].
Tensor permute(const Tensor& x, std::span<const std::size_t> perm);

/// Pairs of (axis of a, axis of b) summed over.
using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// General contraction (tensordot). Output axes are the free axes of `a` in order,
/// followed by the free axes of `b` in order. The contracted multi-index is
/// traversed in ascending row-major order.
Tensor contract(const Tensor& a, const Tensor& b, const AxisPairs& pairs);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool allclose(const Tensor& a, const Tensor& b, double atol);

}  // namespace ugc
