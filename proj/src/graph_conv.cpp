// SPDX-License-Identifier: Apache-2.0
#include "ugc/graph_conv.hpp"

#include <algorithm>

namespace ugc {

namespace {

constexpr std::array<std::string_view, 7> kNames = {"g", "st", "sc", "tc", "s", "t", "c"};

// Diagonal axes per kind, kAllKinds order.
constexpr std::array<AxisSet, 7> kDiagonal = {
    AxisSet{},
    AxisSet{Axis::Channel},
    AxisSet{Axis::Time},
    AxisSet{Axis::Space},
    AxisSet{Axis::Time, Axis::Channel},
    AxisSet{Axis::Space, Axis::Channel},
    AxisSet{Axis::Time, Axis::Space},
};

void check_x(const Tensor& x, const Dims& d, const char* op) {
  if (x.shape() != d.shape()) {
    throw ShapeError(std::string(op) + ": input " + shape_to_string(x.shape()) + " does not match dims " +
                     shape_to_string(d.shape()));
  }
}

Dims dims_of_adjacency(const Tensor& a, const char* op) {
  const auto& s = a.shape();
  if (s.size() != 6 || s[0] != s[3] || s[1] != s[4] || s[2] != s[5]) {
    throw ShapeError(std::string(op) + ": adjacency must have shape (T,J,C,T,J,C), got " +
                     shape_to_string(s));
  }
  return Dims{s[0], s[1], s[2]};
}

void check_cap(const Dims& d, std::size_t cap, const char* op) {
  if (d.nodes() > cap) {
    throw CapacityError(std::string(op) + ": T*J*C = " + std::to_string(d.nodes()) +
                        " exceeds materialization cap " + std::to_string(cap));
  }
}

}  // namespace

std::string_view kind_name(Kind k) noexcept { return kNames[static_cast<std::size_t>(k)]; }

std::optional<Kind> kind_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return kAllKinds[i];
  }
  return std::nullopt;
}

AxisSet diagonal_axes(Kind k) noexcept { return kDiagonal[static_cast<std::size_t>(k)]; }

Kind kind_of(AxisSet diagonal) {
  for (std::size_t i = 0; i < kDiagonal.size(); ++i) {
    if (kDiagonal[i] == diagonal) return kAllKinds[i];
  }
  throw Error("axis set with every axis diagonal is not a graph convolution");
}

GraphConvSpec GraphConvSpec::make(Kind kind, bool tied, Dims dims) {
  return make(diagonal_axes(kind), tied, dims);
}

GraphConvSpec GraphConvSpec::make(AxisSet axes, bool tied, Dims dims) {
  if (axes.is_full()) throw Error("graph convolution needs at least one graph axis");
  if (axes.is_empty() && tied) throw Error("the general case has no diagonal axis to tie over");
  if (dims.T == 0 || dims.J == 0 || dims.C == 0) throw ShapeError("dims must be positive");
  return GraphConvSpec{axes, tied, dims};
}

std::size_t GraphConvSpec::diag_count() const noexcept {
  std::size_t d = 1;
  if (axes.contains(Axis::Time)) d *= dims.T;
  if (axes.contains(Axis::Space)) d *= dims.J;
  if (axes.contains(Axis::Channel)) d *= dims.C;
  return d;
}

std::size_t GraphConvSpec::graph_size() const noexcept { return dims.nodes() / diag_count(); }

std::string GraphConvSpec::label() const {
  std::string s(kind_name(kind()));
  if (tied) s += '*';
  return s;
}

NodeLayout NodeLayout::of(const GraphConvSpec& spec) {
  const auto& d = spec.dims;
  const std::size_t ext[3] = {d.T, d.J, d.C};
  const std::size_t stride[3] = {d.J * d.C, d.C, 1};
  const bool diag[3] = {spec.axes.contains(Axis::Time), spec.axes.contains(Axis::Space),
                        spec.axes.contains(Axis::Channel)};

  auto offsets = [&](bool want_diag) {
    std::vector<std::size_t> out{0};
    for (int ax = 0; ax < 3; ++ax) {
      if (diag[ax] != want_diag) continue;
      std::vector<std::size_t> next;
      next.reserve(out.size() * ext[ax]);
      for (auto base : out)
        for (std::size_t i = 0; i < ext[ax]; ++i) next.push_back(base + i * stride[ax]);
      out = std::move(next);
    }
    return out;
  };
  return NodeLayout{offsets(true), offsets(false)};
}

Shape AdjacencyStore::block_shape(const GraphConvSpec& spec) {
  const std::size_t g = spec.graph_size();
  return {spec.block_count(), g, g};
}

AdjacencyStore AdjacencyStore::zeros(const GraphConvSpec& spec) {
  return AdjacencyStore{spec, Tensor(block_shape(spec))};
}

bool mask_allows(AxisSet diagonal, std::size_t t1, std::size_t j1, std::size_t c1, std::size_t t2,
                 std::size_t j2, std::size_t c2) noexcept {
  if (diagonal.contains(Axis::Time) && t1 != t2) return false;
  if (diagonal.contains(Axis::Space) && j1 != j2) return false;
  if (diagonal.contains(Axis::Channel) && c1 != c2) return false;
  return true;
}

AdjacencyMask build_mask(const GraphConvSpec& spec, std::size_t cap) {
  const auto& d = spec.dims;
  check_cap(d, cap, "build_mask");
  Tensor m({d.T, d.J, d.C, d.T, d.J, d.C});
  std::size_t flat = 0;
  for (std::size_t t1 = 0; t1 < d.T; ++t1)
    for (std::size_t j1 = 0; j1 < d.J; ++j1)
      for (std::size_t c1 = 0; c1 < d.C; ++c1)
        for (std::size_t t2 = 0; t2 < d.T; ++t2)
          for (std::size_t j2 = 0; j2 < d.J; ++j2)
            for (std::size_t c2 = 0; c2 < d.C; ++c2)
              m[flat++] = mask_allows(spec.axes, t1, j1, c1, t2, j2, c2) ? 1.0 : 0.0;
  return AdjacencyMask{spec, std::move(m)};
}

Tensor unigc_general(const Tensor& x, const Tensor& a) {
  const Dims d = dims_of_adjacency(a, "unigc_general");
  check_x(x, d, "unigc_general");
  const std::size_t n = d.nodes();
  Tensor y = matmul(reshape(a, {n, n}), reshape(x, {n, 1}));
  return reshape(std::move(y), d.shape());
}

Tensor unigc_masked(const Tensor& x, const Tensor& a, const AdjacencyMask& m) {
  if (!m.materialized) throw Error("unigc_masked: mask is not materialized");
  if (m.materialized->shape() != a.shape()) {
    throw ShapeError("unigc_masked: mask shape " + shape_to_string(m.materialized->shape()) +
                     " does not match adjacency " + shape_to_string(a.shape()));
  }
  return unigc_general(x, elemwise_mul(a, *m.materialized));
}

void conv_factored_kernel(const GraphConvSpec& spec, const NodeLayout& layout,
                          std::span<const double> blocks, std::span<const double> x, std::span<double> y) {
  const std::size_t g = layout.graph.size();
  const std::size_t nd = layout.diag.size();
  const std::size_t* goff = layout.graph.data();
  std::vector<double> xs(g);
  for (std::size_t d = 0; d < nd; ++d) {
    const double* A = blocks.data() + (spec.tied ? 0 : d * g * g);
    const std::size_t base = layout.diag[d];
    for (std::size_t q = 0; q < g; ++q) xs[q] = x[base + goff[q]];
    // Four independent row accumulators; each row still sums q = 0..g-1 in order.
    std::size_t p = 0;
    for (; p + 4 <= g; p += 4) {
      const double* r0 = A + p * g;
      const double* r1 = r0 + g;
      const double* r2 = r1 + g;
      const double* r3 = r2 + g;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::size_t q = 0; q < g; ++q) {
        const double v = xs[q];
        s0 += r0[q] * v;
        s1 += r1[q] * v;
        s2 += r2[q] * v;
        s3 += r3[q] * v;
      }
      y[base + goff[p]] = s0;
      y[base + goff[p + 1]] = s1;
      y[base + goff[p + 2]] = s2;
      y[base + goff[p + 3]] = s3;
    }
    for (; p < g; ++p) {
      const double* r = A + p * g;
      double s = 0.0;
      for (std::size_t q = 0; q < g; ++q) s += r[q] * xs[q];
      y[base + goff[p]] = s;
    }
  }
}

void conv_factored_backward_kernel(const GraphConvSpec& spec, const NodeLayout& layout,
                                   std::span<const double> blocks, std::span<const double> x,
                                   std::span<const double> dy, std::span<double> dx,
                                   std::span<double> dblocks) {
  const std::size_t g = layout.graph.size();
  const std::size_t nd = layout.diag.size();
  const std::size_t* goff = layout.graph.data();
  std::vector<double> xs(g), dys(g), dxs(g);
  for (std::size_t d = 0; d < nd; ++d) {
    const std::size_t boff = spec.tied ? 0 : d * g * g;
    const double* A = blocks.data() + boff;
    const std::size_t base = layout.diag[d];
    for (std::size_t q = 0; q < g; ++q) {
      xs[q] = x[base + goff[q]];
      dys[q] = dy[base + goff[q]];
    }
    if (!dblocks.empty()) {
      double* dA = dblocks.data() + boff;
      for (std::size_t p = 0; p < g; ++p) {
        const double u = dys[p];
        double* row = dA + p * g;
        for (std::size_t q = 0; q < g; ++q) row[q] += u * xs[q];
      }
    }
    if (!dx.empty()) {
      std::fill(dxs.begin(), dxs.end(), 0.0);
      for (std::size_t p = 0; p < g; ++p) {
        const double u = dys[p];
        const double* row = A + p * g;
        for (std::size_t q = 0; q < g; ++q) dxs[q] += row[q] * u;
      }
      for (std::size_t q = 0; q < g; ++q) dx[base + goff[q]] += dxs[q];
    }
  }
}

Tensor conv_factored(const Tensor& x, const AdjacencyStore& store) {
  const auto& spec = store.spec;
  check_x(x, spec.dims, "conv_factored");
  if (store.blocks.shape() != AdjacencyStore::block_shape(spec)) {
    throw ShapeError("conv_factored: blocks " + shape_to_string(store.blocks.shape()) + " expected " +
                     shape_to_string(AdjacencyStore::block_shape(spec)));
  }
  Tensor y(spec.dims.shape());
  conv_factored_kernel(spec, NodeLayout::of(spec), store.blocks.data(), x.data(), y.data());
  return y;
}

Tensor expand_to_global(const AdjacencyStore& store, std::size_t cap) {
  const auto& spec = store.spec;
  check_cap(spec.dims, cap, "expand_to_global");
  if (store.blocks.shape() != AdjacencyStore::block_shape(spec)) {
    throw ShapeError("expand_to_global: blocks shape mismatch");
  }
  const auto layout = NodeLayout::of(spec);
  const std::size_t n = spec.dims.nodes();
  const std::size_t g = layout.graph.size();
  Tensor a({spec.dims.T, spec.dims.J, spec.dims.C, spec.dims.T, spec.dims.J, spec.dims.C});
  for (std::size_t d = 0; d < layout.diag.size(); ++d) {
    const std::size_t boff = spec.tied ? 0 : d * g * g;
    const std::size_t base = layout.diag[d];
    for (std::size_t p = 0; p < g; ++p)
      for (std::size_t q = 0; q < g; ++q)
        a[(base + layout.graph[p]) * n + base + layout.graph[q]] = store.blocks[boff + p * g + q];
  }
  return a;
}

AdjacencyStore gather_store(const Tensor& global, const GraphConvSpec& spec) {
  const Dims d = dims_of_adjacency(global, "gather_store");
  if (!(d == spec.dims)) throw ShapeError("gather_store: adjacency dims do not match spec");
  const auto layout = NodeLayout::of(spec);
  const std::size_t n = d.nodes();
  const std::size_t g = layout.graph.size();
  auto store = AdjacencyStore::zeros(spec);
  for (std::size_t b = 0; b < spec.block_count(); ++b) {
    const std::size_t base = layout.diag[b];
    for (std::size_t p = 0; p < g; ++p)
      for (std::size_t q = 0; q < g; ++q)
        store.blocks[b * g * g + p * g + q] = global[(base + layout.graph[p]) * n + base + layout.graph[q]];
  }
  return store;
}

std::size_t param_count(const GraphConvSpec& spec) noexcept {
  const std::size_t g = spec.graph_size();
  return spec.block_count() * g * g;
}

std::vector<GraphConvSpec> seven_kinds(Dims dims, bool tied) {
  std::vector<GraphConvSpec> out;
  out.reserve(kAllKinds.size());
  for (auto k : kAllKinds) out.push_back(GraphConvSpec::make(k, tied && k != Kind::General, dims));
  return out;
}

}  // namespace ugc
