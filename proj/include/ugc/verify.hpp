// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ugc/graph_conv.hpp"
#include "ugc/tensor.hpp"

// Self-check suites behind `ugc verify`.
namespace ugc::verify {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  std::string failure;              // first failing case, with its inputs
  std::vector<std::string> report;  // one line per enumerated case group
};

/// Dense 0/1 mask for a spec; injectable so a mutated rule can be tested.
using MaskBuilder = std::function<Tensor(const GraphConvSpec&)>;
Tensor default_mask(const GraphConvSpec& spec);

/// M^s == M^sc . M^st, M^t == M^tc . M^st, M^c == M^sc . M^tc for every (T,J,C) with TJC <= max_nodes.
SuiteResult mask_algebra(const MaskBuilder& build = default_mask, std::size_t max_nodes = 60);
/// conv_factored vs unigc_masked(expand_to_global) vs a six-loop reference at (T,J,C) = dims,
/// for all 7 kinds x {tied, untied} and `seeds` random stores each.
SuiteResult factored_vs_dense(Dims dims = {4, 5, 3}, std::size_t seeds = 20);
/// Tied store == untied store with every block equal; parameter counts differ by d.
SuiteResult tying(Dims dims = {4, 5, 3});
/// A refinement built on a trained-looking base reproduces it bit for bit.
SuiteResult zero_init_refine(std::size_t inputs = 20);
/// Dynamic layer and full model gradients vs central differences.
SuiteResult gradient_check();

std::vector<SuiteResult> run_all();
/// Prints one line per suite (plus its report lines when verbose). True iff all pass.
bool print_results(const std::vector<SuiteResult>& results, std::ostream& os, bool verbose = true);

}  // namespace ugc::verify
