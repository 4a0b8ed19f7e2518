// SPDX-License-Identifier: Apache-2.0
#include "ugc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ugc {

std::size_t shape_product(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor: shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(shape_product(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::vector<std::size_t> Tensor::strides() const {
  std::vector<std::size_t> s(shape_.size(), 1);
  for (std::size_t i = shape_.size(); i-- > 1;) s[i - 1] = s[i] * shape_[i];
  return s;
}

std::size_t Tensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match tensor rank " +
                     std::to_string(shape_.size()));
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) throw ShapeError("index out of range on axis " + std::to_string(i));
    flat = flat * shape_[i] + index[i];
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[flat_index(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  Tensor copy = x;
  return reshape(std::move(copy), std::move(new_shape));
}

Tensor reshape(Tensor&& x, Shape new_shape) {
  if (shape_product(new_shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(new_shape));
  }
  std::vector<double> data(x.data().begin(), x.data().end());
  return Tensor(std::move(new_shape), std::move(data));
}

Tensor elemwise_mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elemwise_mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: operands must be rank 2");
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimension mismatch " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor out({n, m});
  const auto A = a.data();
  const auto B = b.data();
  auto C = out.data();
  // i-k-j order: each C[i,j] still accumulates over k in ascending order.
  for (std::size_t i = 0; i < n; ++i) {
    double* row = C.data() + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = A[i * k + kk];
      const double* brow = B.data() + kk * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: operand must be rank 2");
  const std::size_t perm[2] = {1, 0};
  return permute(a, perm);
}

Tensor permute(const Tensor& x, std::span<const std::size_t> perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw ShapeError("permute: permutation rank mismatch");
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r || seen[perm[i]]) throw ShapeError("permute: not a permutation");
    seen[perm[i]] = true;
    out_shape[i] = x.shape()[perm[i]];
  }
  Tensor out(out_shape);
  if (out.size() == 0) return out;
  const auto in_strides = x.strides();
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) src_stride[i] = in_strides[perm[i]];

  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = x[src];
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      src += src_stride[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= src_stride[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

Tensor contract(const Tensor& a, const Tensor& b, const AxisPairs& pairs) {
  std::vector<bool> a_paired(a.rank(), false), b_paired(b.rank(), false);
  for (auto [ia, ib] : pairs) {
    if (ia >= a.rank() || ib >= b.rank()) throw ShapeError("contract: axis out of range");
    if (a_paired[ia] || b_paired[ib]) throw ShapeError("contract: axis paired twice");
    if (a.shape()[ia] != b.shape()[ib]) {
      throw ShapeError("contract: paired extents differ (" + std::to_string(a.shape()[ia]) + " vs " +
                       std::to_string(b.shape()[ib]) + ")");
    }
    a_paired[ia] = b_paired[ib] = true;
  }

  // Bring a to (free..., paired...) and b to (paired..., free...), then one matmul.
  std::vector<std::size_t> a_perm, b_perm;
  Shape out_shape;
  std::size_t a_free = 1, b_free = 1, inner = 1;
  for (std::size_t i = 0; i < a.rank(); ++i) {
    if (!a_paired[i]) {
      a_perm.push_back(i);
      out_shape.push_back(a.shape()[i]);
      a_free *= a.shape()[i];
    }
  }
  for (auto [ia, ib] : pairs) {
    a_perm.push_back(ia);
    b_perm.push_back(ib);
    inner *= a.shape()[ia];
  }
  for (std::size_t i = 0; i < b.rank(); ++i) {
    if (!b_paired[i]) {
      b_perm.push_back(i);
      out_shape.push_back(b.shape()[i]);
      b_free *= b.shape()[i];
    }
  }
  Tensor am = reshape(permute(a, a_perm), {a_free, inner});
  Tensor bm = reshape(permute(b, b_perm), {inner, b_free});
  return reshape(matmul(am, bm), out_shape);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    if (!(d <= m)) m = d;  // propagates NaN
  }
  return m;
}

bool allclose(const Tensor& a, const Tensor& b, double atol) {
  return max_abs_diff(a, b) <= atol;
}

}  // namespace ugc
