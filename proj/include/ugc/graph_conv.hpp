// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ugc/tensor.hpp"

namespace ugc {

/// Extents of a motion sample: T frames, J joints, C channels.
struct Dims {
  std::size_t T = 1;
  std::size_t J = 1;
  std::size_t C = 1;

  std::size_t nodes() const noexcept { return T * J * C; }
  Shape shape() const { return {T, J, C}; }
  bool operator==(const Dims&) const = default;
};

enum class Axis : std::uint8_t { Time = 1, Space = 2, Channel = 4 };

/// The axes a graph convolution holds fixed ("diagonal"). The complement is
/// the set of axes it aggregates over.
class AxisSet {
 public:
  constexpr AxisSet() = default;
  constexpr AxisSet(std::initializer_list<Axis> axes) {
    for (auto a : axes) bits_ |= static_cast<std::uint8_t>(a);
  }

  constexpr bool contains(Axis a) const noexcept { return bits_ & static_cast<std::uint8_t>(a); }
  constexpr bool is_empty() const noexcept { return bits_ == 0; }
  constexpr bool is_full() const noexcept { return bits_ == 7; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }
  constexpr bool operator==(const AxisSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

/// The seven specializations, in canonical order.
enum class Kind : std::uint8_t { General, ST, SC, TC, S, T, C };

inline constexpr std::array<Kind, 7> kAllKinds = {Kind::General, Kind::ST, Kind::SC, Kind::TC,
                                                  Kind::S,       Kind::T,  Kind::C};

/// Short names: g, st, sc, tc, s, t, c.
std::string_view kind_name(Kind k) noexcept;
std::optional<Kind> kind_from_name(std::string_view name) noexcept;
AxisSet diagonal_axes(Kind k) noexcept;
Kind kind_of(AxisSet diagonal);

struct GraphConvSpec {
  AxisSet axes;
  bool tied = false;
  Dims dims;

  /// Throws ugc::Error for invalid combinations (tied general case, all axes diagonal).
  static GraphConvSpec make(Kind kind, bool tied, Dims dims);
  static GraphConvSpec make(AxisSet axes, bool tied, Dims dims);

  Kind kind() const { return kind_of(axes); }
  /// Number of diagonal index combinations (blocks when untied).
  std::size_t diag_count() const noexcept;
  /// Flattened size of the graph axes (block side length).
  std::size_t graph_size() const noexcept;
  std::size_t block_count() const noexcept { return tied ? 1 : diag_count(); }
  std::string label() const;

  bool operator==(const GraphConvSpec&) const = default;
};

/// Flat node offsets splitting a (t,j,c) flat index into a diagonal part and a
/// graph part: flat = diag[d] + graph[p]. Both lists are in row-major (t,j,c) order.
struct NodeLayout {
  std::vector<std::size_t> diag;
  std::vector<std::size_t> graph;

  static NodeLayout of(const GraphConvSpec& spec);
};

/// Factored adjacency parameters: `blocks` has shape (block_count, g, g).
/// Block entry [p, q] maps input graph node q to output graph node p.
struct AdjacencyStore {
  GraphConvSpec spec;
  Tensor blocks;

  static AdjacencyStore zeros(const GraphConvSpec& spec);
  static Shape block_shape(const GraphConvSpec& spec);
};

struct AdjacencyMask {
  GraphConvSpec spec;
  std::optional<Tensor> materialized;  // 0/1 entries, shape (T,J,C,T,J,C)
};

inline constexpr std::size_t kDefaultMaterializeCap = 256;

/// Rule deciding whether an adjacency entry survives the mask.
bool mask_allows(AxisSet diagonal, std::size_t t1, std::size_t j1, std::size_t c1, std::size_t t2,
                 std::size_t j2, std::size_t c2) noexcept;

AdjacencyMask build_mask(const GraphConvSpec& spec, std::size_t cap = kDefaultMaterializeCap);

/// Y = R_TJC( R_{TJC,TJC}(a) R_TJC(x) ).
Tensor unigc_general(const Tensor& x, const Tensor& a);
/// unigc_general(x, a ⊙ m).
Tensor unigc_masked(const Tensor& x, const Tensor& a, const AdjacencyMask& m);

/// Block-wise application; never materializes the dense adjacency.
Tensor conv_factored(const Tensor& x, const AdjacencyStore& store);

/// Raw kernels shared by conv_factored and the differentiable op.
/// Writes y (size TJC) from x (size TJC). Summation order per output entry is
/// ascending input graph index.
void conv_factored_kernel(const GraphConvSpec& spec, const NodeLayout& layout,
                          std::span<const double> blocks, std::span<const double> x, std::span<double> y);
/// Accumulates into dx and dblocks the gradient of <dy, conv(x)>.
void conv_factored_backward_kernel(const GraphConvSpec& spec, const NodeLayout& layout,
                                   std::span<const double> blocks, std::span<const double> x,
                                   std::span<const double> dy, std::span<double> dx,
                                   std::span<double> dblocks);

/// Scatter the store onto a dense (T,J,C,T,J,C) adjacency.
Tensor expand_to_global(const AdjacencyStore& store, std::size_t cap = kDefaultMaterializeCap);
/// Read blocks back out of a dense adjacency (tied stores read diagonal index 0).
AdjacencyStore gather_store(const Tensor& global, const GraphConvSpec& spec);

std::size_t param_count(const GraphConvSpec& spec) noexcept;

/// The general case followed by the six masked specializations, in kAllKinds order.
std::vector<GraphConvSpec> seven_kinds(Dims dims, bool tied = false);

}  // namespace ugc
