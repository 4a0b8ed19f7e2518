// SPDX-License-Identifier: Apache-2.0
#include "ugc/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numeric>

namespace ugc::ad {

namespace {

constexpr std::array<std::string_view, 20> kOpNames = {
    "leaf",    "constant", "matmul",  "contract",          "reshape",      "add",        "elemwise_mul",
    "scale",   "sum",      "mean",    "layer_norm",        "affine",       "relu",       "softmax",
    "gumbel_softmax_st",   "weighted_sum", "slice_rows",   "graph_conv", "mse_loss",   "mpjpe_loss"};

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

// Axis bookkeeping for contraction gradients.
struct ContractAxes {
  std::vector<std::size_t> free_a, free_b, paired_a_sorted, paired_b_sorted;
};

ContractAxes contract_axes(std::size_t ra, std::size_t rb, const AxisPairs& pairs) {
  std::vector<bool> pa(ra, false), pb(rb, false);
  for (auto [ia, ib] : pairs) {
    pa.at(ia) = true;
    pb.at(ib) = true;
  }
  ContractAxes out;
  for (std::size_t i = 0; i < ra; ++i) (pa[i] ? out.paired_a_sorted : out.free_a).push_back(i);
  for (std::size_t i = 0; i < rb; ++i) (pb[i] ? out.paired_b_sorted : out.free_b).push_back(i);
  return out;
}

std::size_t position_of(const std::vector<std::size_t>& v, std::size_t x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

}  // namespace

std::string_view op_name(OpKind kind) noexcept { return kOpNames[static_cast<std::size_t>(kind)]; }

OpKind op_kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<OpKind>(i);
  }
  throw UnsupportedOperation("unsupported operation: " + std::string(name));
}

Parameter::Parameter(std::string n, Tensor v, bool t)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(t) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  std::fill(grad.data().begin(), grad.data().end(), 0.0);
}

// -- Var / Tape ---------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

Var Tape::make(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  return make(Node{OpKind::Constant, std::move(value), {}, {}, {}, nullptr, false});
}

Var Tape::leaf(Tensor value) { return make(Node{OpKind::Leaf, std::move(value), {}, {}, {}, nullptr, true}); }

Var Tape::param(Parameter& p) {
  if (!p.trainable) return constant(p.value);
  return make(Node{OpKind::Leaf, p.value, {}, {}, {}, &p, true});
}

Var Tape::push(OpKind kind, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool rg = false;
  for (auto i : inputs) rg = rg || nodes_.at(i).requires_grad;
  if (!rg) backward = nullptr;
  return make(Node{kind, std::move(value), {}, std::move(inputs), std::move(backward), nullptr, rg});
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape());
  return n.grad.data();
}

void Tape::accumulate(std::size_t id, std::span<const double> g) {
  if (!nodes_[id].requires_grad) return;
  auto buf = grad_buffer(id);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("backward: loss belongs to another tape");
  const std::size_t root = loss.id();
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_to_string(nodes_[root].value.shape()));
  }
  if (!nodes_[root].requires_grad) return;
  grad_buffer(root)[0] += 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (std::size_t i = 0; i <= root; ++i) {
    Node& n = nodes_[i];
    if (n.param == nullptr || n.grad.size() == 0) continue;
    if (n.param->grad.shape() != n.param->value.shape()) n.param->zero_grad();
    auto pg = n.param->grad.data();
    for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
  }
}

// -- operations ------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor out = ugc::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(OpKind::Matmul, std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& up = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, ugc::matmul(up, transpose(t.value(ib))).data());
    if (t.requires_grad(ib)) t.accumulate(ib, ugc::matmul(transpose(t.value(ia)), up).data());
  });
}

Var contract(Var a, Var b, const AxisPairs& pairs) {
  require_same_tape(a, b, "contract");
  Tensor out = ugc::contract(a.value(), b.value(), pairs);
  const std::size_t ia = a.id(), ib = b.id();
  const auto axes = contract_axes(a.value().rank(), b.value().rank(), pairs);
  return a.tape().push(
      OpKind::Contract, std::move(out), {ia, ib}, [ia, ib, pairs, axes](Tape& t, std::size_t self) {
        const Tensor& up = t.grad(self);
        const std::size_t nfa = axes.free_a.size();
        if (t.requires_grad(ia)) {
          AxisPairs p2;
          for (std::size_t k = 0; k < axes.free_b.size(); ++k) p2.emplace_back(nfa + k, axes.free_b[k]);
          Tensor r = ugc::contract(up, t.value(ib), p2);  // (free_a..., paired_b sorted...)
          const std::size_t ra = t.value(ia).rank();
          std::vector<std::size_t> perm(ra);
          for (std::size_t i = 0; i < ra; ++i) {
            auto it = std::find_if(pairs.begin(), pairs.end(), [i](auto pr) { return pr.first == i; });
            perm[i] = it == pairs.end() ? position_of(axes.free_a, i)
                                        : nfa + position_of(axes.paired_b_sorted, it->second);
          }
          t.accumulate(ia, permute(r, perm).data());
        }
        if (t.requires_grad(ib)) {
          AxisPairs p3;
          for (std::size_t k = 0; k < nfa; ++k) p3.emplace_back(axes.free_a[k], k);
          Tensor r = ugc::contract(t.value(ia), up, p3);  // (paired_a sorted..., free_b...)
          const std::size_t rb = t.value(ib).rank();
          const std::size_t npa = axes.paired_a_sorted.size();
          std::vector<std::size_t> perm(rb);
          for (std::size_t i = 0; i < rb; ++i) {
            auto it = std::find_if(pairs.begin(), pairs.end(), [i](auto pr) { return pr.second == i; });
            perm[i] = it == pairs.end() ? npa + position_of(axes.free_b, i)
                                        : position_of(axes.paired_a_sorted, it->first);
          }
          t.accumulate(ib, permute(r, perm).data());
        }
      });
}

Var reshape(Var x, Shape shape) {
  Tensor out = ugc::reshape(x.value(), std::move(shape));
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::Reshape, std::move(out), {ix},
                       [ix](Tape& t, std::size_t self) { t.accumulate(ix, t.grad(self).data()); });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  Tensor out = ugc::add(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(OpKind::Add, std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    t.accumulate(ia, t.grad(self).data());
    t.accumulate(ib, t.grad(self).data());
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "elemwise_mul");
  Tensor out = elemwise_mul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().push(OpKind::ElemwiseMul, std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& up = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, elemwise_mul(up, t.value(ib)).data());
    if (t.requires_grad(ib)) t.accumulate(ib, elemwise_mul(up, t.value(ia)).data());
  });
}

Var scale(Var x, double s) {
  Tensor out = ugc::scale(x.value(), s);
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::ScalarScale, std::move(out), {ix}, [ix, s](Tape& t, std::size_t self) {
    t.accumulate(ix, ugc::scale(t.grad(self), s).data());
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::Sum, Tensor::scalar(s), {ix}, [ix](Tape& t, std::size_t self) {
    const double u = t.grad(self)[0];
    auto g = t.grad_buffer(ix);
    for (auto& v : g) v += u;
  });
}

Var mean_over_axes(Var x, std::vector<std::size_t> axes) {
  const Tensor& in = x.value();
  const std::size_t r = in.rank();
  std::vector<bool> reduce(r, false);
  for (auto a : axes) {
    if (a >= r) throw ShapeError("mean_over_axes: axis out of range");
    reduce[a] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < r; ++i) {
    if (reduce[i]) count *= in.shape()[i];
    else out_shape.push_back(in.shape()[i]);
  }
  // Map every input flat index to its output flat index.
  auto index_map = std::make_shared<std::vector<std::size_t>>(in.size());
  {
    std::vector<std::size_t> idx(r, 0);
    for (std::size_t flat = 0; flat < in.size(); ++flat) {
      std::size_t o = 0;
      for (std::size_t i = 0; i < r; ++i)
        if (!reduce[i]) o = o * in.shape()[i] + idx[i];
      (*index_map)[flat] = o;
      for (std::size_t ax = r; ax-- > 0;) {
        if (++idx[ax] < in.shape()[ax]) break;
        idx[ax] = 0;
      }
    }
  }
  Tensor out(out_shape);
  for (std::size_t flat = 0; flat < in.size(); ++flat) out[(*index_map)[flat]] += in[flat];
  const double inv = 1.0 / static_cast<double>(count);
  for (auto& v : out.data()) v *= inv;
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::MeanOverAxes, std::move(out), {ix}, [ix, index_map, inv](Tape& t, std::size_t self) {
    const Tensor& up = t.grad(self);
    auto g = t.grad_buffer(ix);
    for (std::size_t flat = 0; flat < g.size(); ++flat) g[flat] += up[(*index_map)[flat]] * inv;
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  require_same_tape(x, gamma, "layer_norm");
  require_same_tape(x, beta, "layer_norm");
  const Tensor& in = x.value();
  if (in.rank() == 0) throw ShapeError("layer_norm: input must have rank >= 1");
  const std::size_t cols = in.shape().back();
  const std::size_t rows = in.size() / cols;
  if (gamma.value().shape() != Shape{cols} || beta.value().shape() != Shape{cols}) {
    throw ShapeError("layer_norm: gamma/beta must have shape (" + std::to_string(cols) + ")");
  }
  const auto& g = gamma.value();
  const auto& b = beta.value();
  Tensor out(in.shape());
  Tensor xhat(in.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data().data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (row[c] - mu) * is;
      xhat[r * cols + c] = xh;
      out[r * cols + c] = g[c] * xh + b[c];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().push(
      OpKind::LayerNorm, std::move(out), {ix, ig, ib},
      [ix, ig, ib, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Tensor& up = t.grad(self);
        const Tensor& gv = t.value(ig);
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
          std::vector<double> dg(cols, 0.0), db(cols, 0.0);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              dg[c] += up[r * cols + c] * xhat[r * cols + c];
              db[c] += up[r * cols + c];
            }
          t.accumulate(ig, dg);
          t.accumulate(ib, db);
        }
        if (t.requires_grad(ix)) {
          auto dx = t.grad_buffer(ix);
          const double n = static_cast<double>(cols);
          std::vector<double> dxh(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              dxh[c] = up[r * cols + c] * gv[c];
              s1 += dxh[c];
              s2 += dxh[c] * xhat[r * cols + c];
            }
            const double k = inv_std[r] / n;
            for (std::size_t c = 0; c < cols; ++c)
              dx[r * cols + c] += k * (n * dxh[c] - s1 - xhat[r * cols + c] * s2);
          }
        }
      });
}

Var affine(Var x, Var w, Var b) {
  require_same_tape(x, w, "affine");
  require_same_tape(x, b, "affine");
  const Tensor& in = x.value();
  const Tensor& wv = w.value();
  if (wv.rank() != 2) throw ShapeError("affine: weight must be rank 2");
  const std::size_t nout = wv.shape()[0], nin = wv.shape()[1];
  if (in.rank() == 0 || in.rank() > 2 || in.shape().back() != nin) {
    throw ShapeError("affine: input " + shape_to_string(in.shape()) + " incompatible with weight " +
                     shape_to_string(wv.shape()));
  }
  if (b.value().shape() != Shape{nout}) throw ShapeError("affine: bias must have shape (out)");
  const std::size_t rows = in.rank() == 1 ? 1 : in.shape()[0];
  Shape out_shape = in.rank() == 1 ? Shape{nout} : Shape{rows, nout};
  Tensor out(out_shape);
  const auto& bv = b.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data().data() + r * nin;
    for (std::size_t o = 0; o < nout; ++o) {
      const double* wr = wv.data().data() + o * nin;
      double s = 0.0;
      for (std::size_t i = 0; i < nin; ++i) s += xr[i] * wr[i];
      out[r * nout + o] = s + bv[o];
    }
  }
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape().push(OpKind::Affine, std::move(out), {ix, iw, ib},
                       [ix, iw, ib, rows, nin, nout](Tape& t, std::size_t self) {
                         const Tensor& up = t.grad(self);
                         if (t.requires_grad(ix)) {
                           const Tensor& wv = t.value(iw);
                           auto dx = t.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t o = 0; o < nout; ++o) {
                               const double u = up[r * nout + o];
                               const double* wr = wv.data().data() + o * nin;
                               for (std::size_t i = 0; i < nin; ++i) dx[r * nin + i] += u * wr[i];
                             }
                         }
                         if (t.requires_grad(iw)) {
                           const Tensor& xv = t.value(ix);
                           auto dw = t.grad_buffer(iw);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t o = 0; o < nout; ++o) {
                               const double u = up[r * nout + o];
                               const double* xr = xv.data().data() + r * nin;
                               for (std::size_t i = 0; i < nin; ++i) dw[o * nin + i] += u * xr[i];
                             }
                         }
                         if (t.requires_grad(ib)) {
                           auto db = t.grad_buffer(ib);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t o = 0; o < nout; ++o) db[o] += up[r * nout + o];
                         }
                       });
}

Var relu(Var x) {
  Tensor out(x.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.value()[i]);
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::Relu, std::move(out), {ix}, [ix](Tape& t, std::size_t self) {
    const Tensor& up = t.grad(self);
    const Tensor& xv = t.value(ix);
    auto g = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += up[i];
  });
}

namespace {

std::vector<double> softmax_values(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> s(z.size());
  double tot = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s[i] = std::exp(z[i] - m);
    tot += s[i];
  }
  for (auto& v : s) v /= tot;
  return s;
}

// d/dz of softmax(z) applied to upstream u, scaled by `k`.
void softmax_backward(std::span<const double> s, std::span<const double> u, double k, std::span<double> dz) {
  double dot = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += s[i] * u[i];
  for (std::size_t i = 0; i < s.size(); ++i) dz[i] += k * s[i] * (u[i] - dot);
}

}  // namespace

Var softmax(Var logits) {
  if (logits.value().rank() != 1 || logits.value().size() == 0) {
    throw ShapeError("softmax: expects a non-empty rank-1 input");
  }
  auto s = softmax_values(logits.value().data());
  Tensor out({s.size()}, s);
  const std::size_t il = logits.id();
  return logits.tape().push(OpKind::Softmax, std::move(out), {il}, [il](Tape& t, std::size_t self) {
    softmax_backward(t.value(self).data(), t.grad(self).data(), 1.0, t.grad_buffer(il));
  });
}

Var gumbel_softmax_st(Var logits, double tau, std::span<const double> noise, bool hard) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax_st: temperature must be positive");
  const Tensor& lv = logits.value();
  if (lv.rank() != 1 || lv.size() < 2) throw ShapeError("gumbel_softmax_st: need a rank-1 input with N >= 2");
  if (noise.size() != lv.size()) throw ShapeError("gumbel_softmax_st: noise length mismatch");
  std::vector<double> z(lv.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = (lv[i] + noise[i]) / tau;
  auto soft = softmax_values(z);
  Tensor out({soft.size()});
  if (hard) {
    const auto k = static_cast<std::size_t>(std::max_element(soft.begin(), soft.end()) - soft.begin());
    out[k] = 1.0;
  } else {
    for (std::size_t i = 0; i < soft.size(); ++i) out[i] = soft[i];
  }
  const std::size_t il = logits.id();
  return logits.tape().push(OpKind::GumbelSoftmaxST, std::move(out), {il},
                            [il, tau, soft = std::move(soft)](Tape& t, std::size_t self) {
                              softmax_backward(soft, t.grad(self).data(), 1.0 / tau, t.grad_buffer(il));
                            });
}

Var gumbel_softmax_st(Var logits, double tau, Rng& rng, bool hard) {
  std::vector<double> noise(logits.value().size());
  for (auto& g : noise) g = gumbel(rng);
  return gumbel_softmax_st(logits, tau, noise, hard);
}

Var weighted_sum(Var v, std::span<const Var> ys) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1 || vv.size() != ys.size() || ys.empty()) {
    throw ShapeError("weighted_sum: weight vector length must equal the number of branches");
  }
  Tensor out(ys[0].value().shape());
  std::vector<std::size_t> inputs{v.id()};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    require_same_tape(v, ys[i], "weighted_sum");
    const Tensor& y = ys[i].value();
    require_same_shape(out, y, "weighted_sum");
    const double w = vv[i];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * y[k];
    inputs.push_back(ys[i].id());
  }
  return v.tape().push(OpKind::WeightedSum, std::move(out), inputs, [inputs](Tape& t, std::size_t self) {
    const Tensor& up = t.grad(self);
    const std::size_t iv = inputs[0];
    const Tensor& vv = t.value(iv);
    if (t.requires_grad(iv)) {
      std::vector<double> dv(vv.size(), 0.0);
      for (std::size_t i = 0; i < dv.size(); ++i) {
        const Tensor& y = t.value(inputs[i + 1]);
        double s = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) s += up[k] * y[k];
        dv[i] = s;
      }
      t.accumulate(iv, dv);
    }
    for (std::size_t i = 0; i < vv.size(); ++i) {
      const std::size_t iy = inputs[i + 1];
      // An exactly-zero weight contributes nothing; skipping keeps unselected branches idle.
      if (vv[i] == 0.0 || !t.requires_grad(iy)) continue;
      auto g = t.grad_buffer(iy);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += vv[i] * up[k];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Tensor& in = x.value();
  if (in.rank() == 0 || begin + count > in.shape()[0]) throw ShapeError("slice_rows: range out of bounds");
  Shape s = in.shape();
  s[0] = count;
  const std::size_t row = in.size() / in.shape()[0];
  std::vector<double> data(in.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                           in.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * row));
  const std::size_t ix = x.id();
  return x.tape().push(OpKind::SliceRows, Tensor(std::move(s), std::move(data)), {ix},
                       [ix, begin, row](Tape& t, std::size_t self) {
                         const Tensor& up = t.grad(self);
                         auto g = t.grad_buffer(ix);
                         for (std::size_t k = 0; k < up.size(); ++k) g[begin * row + k] += up[k];
                       });
}

Var graph_conv(Var x, Var blocks, const GraphConvSpec& spec, const NodeLayout& layout) {
  require_same_tape(x, blocks, "graph_conv");
  if (x.value().shape() != spec.dims.shape()) {
    throw ShapeError("graph_conv: input " + shape_to_string(x.value().shape()) + " does not match dims " +
                     shape_to_string(spec.dims.shape()));
  }
  if (blocks.value().shape() != AdjacencyStore::block_shape(spec)) {
    throw ShapeError("graph_conv: blocks " + shape_to_string(blocks.value().shape()) + " expected " +
                     shape_to_string(AdjacencyStore::block_shape(spec)));
  }
  Tensor out(spec.dims.shape());
  conv_factored_kernel(spec, layout, blocks.value().data(), x.value().data(), out.data());
  const std::size_t ix = x.id(), ia = blocks.id();
  auto lay = std::make_shared<const NodeLayout>(layout);
  return x.tape().push(OpKind::GraphConv, std::move(out), {ix, ia}, [ix, ia, spec, lay](Tape& t, std::size_t self) {
    std::span<double> dx = t.requires_grad(ix) ? t.grad_buffer(ix) : std::span<double>{};
    std::span<double> da = t.requires_grad(ia) ? t.grad_buffer(ia) : std::span<double>{};
    conv_factored_backward_kernel(spec, *lay, t.value(ia).data(), t.value(ix).data(), t.grad(self).data(), dx, da);
  });
}

Var mse_loss(Var pred, Var target) {
  require_same_tape(pred, target, "mse_loss");
  require_same_shape(pred.value(), target.value(), "mse_loss");
  const auto& p = pred.value();
  const auto& q = target.value();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
  const double n = static_cast<double>(p.size());
  const std::size_t ip = pred.id(), iq = target.id();
  return pred.tape().push(OpKind::MseLoss, Tensor::scalar(s / n), {ip, iq}, [ip, iq, n](Tape& t, std::size_t self) {
    const double u = t.grad(self)[0];
    const Tensor& p = t.value(ip);
    const Tensor& q = t.value(iq);
    std::vector<double> d(p.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = 2.0 * (p[i] - q[i]) / n * u;
    t.accumulate(ip, d);
    for (auto& v : d) v = -v;
    t.accumulate(iq, d);
  });
}

Var mpjpe_loss(Var pred, Var target) {
  require_same_tape(pred, target, "mpjpe_loss");
  require_same_shape(pred.value(), target.value(), "mpjpe_loss");
  const auto& p = pred.value();
  const auto& q = target.value();
  if (p.rank() == 0) throw ShapeError("mpjpe_loss: inputs must have a channel axis");
  const std::size_t c = p.shape().back();
  const std::size_t rows = p.size() / c;
  std::vector<double> norms(rows);
  double s = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double d = p[r * c + k] - q[r * c + k];
      acc += d * d;
    }
    norms[r] = std::sqrt(acc);
    s += norms[r];
  }
  const std::size_t ip = pred.id(), iq = target.id();
  return pred.tape().push(OpKind::MpjpeLoss, Tensor::scalar(s / static_cast<double>(rows)), {ip, iq},
                          [ip, iq, c, rows, norms = std::move(norms)](Tape& t, std::size_t self) {
                            const double u = t.grad(self)[0] / static_cast<double>(rows);
                            const Tensor& p = t.value(ip);
                            const Tensor& q = t.value(iq);
                            std::vector<double> d(p.size(), 0.0);
                            for (std::size_t r = 0; r < rows; ++r) {
                              if (norms[r] == 0.0) continue;  // subgradient 0 at coincidence
                              for (std::size_t k = 0; k < c; ++k)
                                d[r * c + k] = (p[r * c + k] - q[r * c + k]) / norms[r] * u;
                            }
                            t.accumulate(ip, d);
                            for (auto& v : d) v = -v;
                            t.accumulate(iq, d);
                          });
}

Var record(OpKind kind, std::span<const Var> in, const OpAttrs& at) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                       std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::Matmul: need(2); return matmul(in[0], in[1]);
    case OpKind::Contract: need(2); return contract(in[0], in[1], at.pairs);
    case OpKind::Reshape: need(1); return reshape(in[0], at.shape);
    case OpKind::Add: need(2); return add(in[0], in[1]);
    case OpKind::ElemwiseMul: need(2); return mul(in[0], in[1]);
    case OpKind::ScalarScale: need(1); return scale(in[0], at.scalar);
    case OpKind::Sum: need(1); return sum(in[0]);
    case OpKind::MeanOverAxes: need(1); return mean_over_axes(in[0], at.axes);
    case OpKind::LayerNorm: need(3); return layer_norm(in[0], in[1], in[2], at.eps);
    case OpKind::Affine: need(3); return affine(in[0], in[1], in[2]);
    case OpKind::Relu: need(1); return relu(in[0]);
    case OpKind::Softmax: need(1); return softmax(in[0]);
    case OpKind::GumbelSoftmaxST: need(1); return gumbel_softmax_st(in[0], at.tau, at.noise, at.hard);
    case OpKind::WeightedSum:
      if (in.size() < 2) throw ShapeError("weighted_sum: needs weights and at least one branch");
      return weighted_sum(in[0], in.subspan(1));
    case OpKind::SliceRows: need(1); return slice_rows(in[0], at.begin, at.count);
    case OpKind::GraphConv:
      need(2);
      if (at.spec == nullptr) throw Error("graph_conv: missing spec attribute");
      return graph_conv(in[0], in[1], *at.spec, NodeLayout::of(*at.spec));
    case OpKind::MseLoss: need(2); return mse_loss(in[0], in[1]);
    case OpKind::MpjpeLoss: need(2); return mpjpe_loss(in[0], in[1]);
    case OpKind::Leaf:
    case OpKind::Constant: break;
  }
  throw UnsupportedOperation("record: '" + std::string(op_name(kind)) + "' is not a recordable operation");
}

// -- optimization ------------------------------------------------------------------

double global_grad_norm(std::span<Parameter* const> params) {
  double s = 0.0;
  for (const auto* p : params) {
    if (!p->trainable) continue;
    for (double g : p->grad.data()) s += g * g;
  }
  return std::sqrt(s);
}

void Adam::step(std::span<Parameter* const> params, std::size_t iteration) {
  ++steps_;
  const double lr = schedule_.rate(iteration);
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  double clip = 1.0;
  if (cfg_.clip_norm > 0.0) {
    const double n = global_grad_norm(params);
    if (n > cfg_.clip_norm) clip = cfg_.clip_norm / n;
  }
  for (auto* p : params) {
    if (!p->trainable) continue;
    if (p->grad.shape() != p->value.shape()) p->zero_grad();
    auto& st = state_[p->name];
    if (st.m.shape() != p->value.shape()) {
      st.m = Tensor(p->value.shape());
      st.v = Tensor(p->value.shape());
    }
    auto val = p->value.data();
    auto g = p->grad.data();
    auto m = st.m.data();
    auto v = st.v.data();
    for (std::size_t i = 0; i < val.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double finite_diff_check(const std::function<Var(Tape&)>& build_loss, std::span<Parameter* const> params,
                         double h) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  auto eval = [&] {
    Tape tape;
    return build_loss(tape).value()[0];
  };
  double worst = 0.0;
  for (auto* p : params) {
    if (!p->trainable) continue;
    const Tensor analytic = p->grad;
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double orig = p->value[k];
      p->value[k] = orig + h;
      const double fp = eval();
      p->value[k] = orig - h;
      const double fm = eval();
      p->value[k] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k];
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        throw NumericError("finite_diff_check: non-finite value for " + p->name + "[" + std::to_string(k) + "]");
      }
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace ugc::ad
