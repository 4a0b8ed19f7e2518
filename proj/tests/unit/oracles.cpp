// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace oracle {

Diag diag_of(Kind k) {
  switch (k) {
    case Kind::General: return {false, false, false};
    case Kind::ST: return {false, false, true};
    case Kind::SC: return {true, false, false};
    case Kind::TC: return {false, true, false};
    case Kind::S: return {true, false, true};
    case Kind::T: return {false, true, true};
    case Kind::C: return {true, true, false};
  }
  throw std::logic_error("kind");
}

bool keep(Kind k, std::size_t t1, std::size_t j1, std::size_t c1, std::size_t t2, std::size_t j2, std::size_t c2) {
  const Diag d = diag_of(k);
  if (d.t && t1 != t2) return false;
  if (d.j && j1 != j2) return false;
  if (d.c && c1 != c2) return false;
  return true;
}

Tensor dense_mask(Kind k, std::size_t T, std::size_t J, std::size_t C) {
  Tensor m({T, J, C, T, J, C});
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < J; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t d = 0; d < T; ++d)
          for (std::size_t e = 0; e < J; ++e)
            for (std::size_t f = 0; f < C; ++f) m.at({a, b, c, d, e, f}) = keep(k, a, b, c, d, e, f) ? 1.0 : 0.0;
  return m;
}

Tensor six_loop(const Tensor& x, const Tensor& a6, Kind k) {
  const std::size_t T = x.extent(0), J = x.extent(1), C = x.extent(2);
  Tensor y({T, J, C});
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < J; ++b)
      for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < T; ++d)
          for (std::size_t e = 0; e < J; ++e)
            for (std::size_t f = 0; f < C; ++f)
              if (keep(k, a, b, c, d, e, f)) s += a6.at({a, b, c, d, e, f}) * x.at({d, e, f});
        y.at({a, b, c}) = s;
      }
  return y;
}

std::size_t diag_count(Kind k, std::size_t T, std::size_t J, std::size_t C) {
  const Diag d = diag_of(k);
  return (d.t ? T : 1) * (d.j ? J : 1) * (d.c ? C : 1);
}

std::size_t graph_size(Kind k, std::size_t T, std::size_t J, std::size_t C) {
  const Diag d = diag_of(k);
  return (d.t ? 1 : T) * (d.j ? 1 : J) * (d.c ? 1 : C);
}

Tensor dense_from_blocks(Kind k, bool tied, std::size_t T, std::size_t J, std::size_t C, const Tensor& blocks) {
  const Diag dg = diag_of(k);
  const std::size_t g = graph_size(k, T, J, C);
  Tensor a({T, J, C, T, J, C});
  // Split each node into its diagonal tuple index and its graph tuple index.
  auto split = [&](std::size_t t, std::size_t j, std::size_t c, std::size_t& di, std::size_t& gi) {
    di = 0;
    gi = 0;
    if (dg.t) di = di * T + t; else gi = gi * T + t;
    if (dg.j) di = di * J + j; else gi = gi * J + j;
    if (dg.c) di = di * C + c; else gi = gi * C + c;
  };
  for (std::size_t t1 = 0; t1 < T; ++t1)
    for (std::size_t j1 = 0; j1 < J; ++j1)
      for (std::size_t c1 = 0; c1 < C; ++c1)
        for (std::size_t t2 = 0; t2 < T; ++t2)
          for (std::size_t j2 = 0; j2 < J; ++j2)
            for (std::size_t c2 = 0; c2 < C; ++c2) {
              if (!keep(k, t1, j1, c1, t2, j2, c2)) continue;
              std::size_t d1, p, d2, q;
              split(t1, j1, c1, d1, p);
              split(t2, j2, c2, d2, q);
              const std::size_t b = tied ? 0 : d1;
              a.at({t1, j1, c1, t2, j2, c2}) = blocks[(b * g + p) * g + q];
            }
  return a;
}

Tensor triple_loop(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
  Tensor c({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a.at({i, l}) * b.at({l, j});
      c.at({i, j}) = s;
    }
  return c;
}

Tensor random(ugc::Shape shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

std::vector<double> central_diff(const std::function<double()>& f, std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep_v = x[i];
    x[i] = keep_v + h;
    const double up = f();
    x[i] = keep_v - h;
    const double down = f();
    x[i] = keep_v;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& n) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - n[i]) / std::max(1.0, std::abs(a[i])));
  return worst;
}

double op_grad_error(const std::vector<Tensor>& inputs, const OpFn& op, double h) {
  using ugc::ad::Tape;
  using ugc::ad::Var;
  Tensor w;
  std::vector<std::vector<double>> raw;
  for (const auto& t : inputs) raw.emplace_back(t.values());

  auto forward = [&](bool as_leaves, Tape& tape, std::vector<Var>& vars) {
    vars.clear();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tensor t(inputs[i].shape(), raw[i]);
      vars.push_back(as_leaves ? tape.leaf(std::move(t)) : tape.constant(std::move(t)));
    }
    Var y = op(tape, vars);
    if (w.empty()) w = random(y.shape(), 4242);
    return ugc::ad::sum(ugc::ad::mul(y, tape.constant(w)));
  };

  Tape tape;
  std::vector<Var> leaves;
  tape.backward(forward(true, tape, leaves));

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor& g = leaves[i].grad();
    const std::vector<double> analytic = g.empty() ? std::vector<double>(raw[i].size(), 0.0) : g.values();
    auto f = [&] {
      Tape t2;
      std::vector<Var> vs;
      return forward(false, t2, vs).value()[0];
    };
    worst = std::max(worst, rel_err(analytic, central_diff(f, raw[i], h)));
  }
  return worst;
}

}  // namespace oracle
