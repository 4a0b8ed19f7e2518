// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ugc/gcnext.hpp"
#include "ugc/graph_conv.hpp"

// Analytic cost accounting. Forward pass only; a multiply-add counts as 2 FLOPs,
// a lone add, multiply or compare as 1.
namespace ugc::bench {

/// 2 * d * g^2 for every spec (the general operator has d = 1, g = TJC).
std::uint64_t flops_conv(const GraphConvSpec& spec) noexcept;
/// Dense affine map of `rows` vectors: 2*in*out multiply-adds plus `out` bias adds per row.
std::uint64_t flops_affine(std::size_t rows, std::size_t in, std::size_t out) noexcept;
/// Per-element cost of layer normalization (mean, variance, normalize, scale+shift).
inline constexpr std::uint64_t kLayerNormFlopsPerElement = 7;

struct LayerCost {
  std::size_t layer = 0;
  std::string options;  // branch labels joined by '|', base branch prefixed with '+'
  std::uint64_t params = 0;
  std::uint64_t train_flops = 0;
  std::uint64_t infer_flops = 0;
  std::uint64_t branch_flops_train = 0;
  std::uint64_t branch_flops_infer = 0;
  std::uint64_t selector_flops = 0;
  std::uint64_t branch_evals_train = 0;
  std::uint64_t branch_evals_infer = 0;
  std::uint64_t peak_elements_train = 0;
  std::uint64_t peak_elements_infer = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  LayerCost total;  // sums of the per-layer rows (peaks are maxima)
  LayerCost head;   // input preparation and output map, outside the layer stack

  std::uint64_t model_params() const noexcept { return total.params + head.params; }
  std::uint64_t model_train_flops() const noexcept { return total.train_flops + head.train_flops; }
  std::uint64_t model_infer_flops() const noexcept { return total.infer_flops + head.infer_flops; }
};

/// Per-layer cost. Training evaluates every branch to form the weighted sum. Inference
/// of a selector layer runs one branch: the most expensive candidate, or the expected
/// cost under `policy` (per-layer selection frequencies) when one is given. Static
/// aggregates run every branch in both modes.
CostReport cost_model(const gcnext::Model& model, const std::vector<std::vector<double>>* policy = nullptr);

/// Aligned plain-text table with the FLOP convention in its header.
std::string format_text(const CostReport& r);
/// CSV: layer,kind_options,params,train_flops,infer_flops; one row per layer plus a total row.
std::string format_csv(const CostReport& r);
/// Writes the CSV to `csv_path` and the text table next to it (extension .txt).
/// Throws IoError when either file cannot be written. Returns the text table.
std::string emit_report(const CostReport& r, const std::filesystem::path& csv_path);

}  // namespace ugc::bench
