// SPDX-License-Identifier: Apache-2.0
#include "ugc/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ugc/error.hpp"

namespace ugc::bench {

namespace {

std::uint64_t u64(std::size_t v) { return static_cast<std::uint64_t>(v); }

LayerCost layer_cost(const gcnext::Layer& layer, std::size_t index, const Dims& d,
                     const std::vector<double>* probs) {
  const std::uint64_t nodes = u64(d.nodes());
  const std::uint64_t n = u64(layer.candidates.size());
  LayerCost c;
  c.layer = index;

  std::vector<std::uint64_t> branch;
  for (const auto& b : layer.candidates) {
    if (!c.options.empty()) c.options += '|';
    c.options += b.null_branch ? std::string("0:") + b.spec.label() : b.spec.label();
    branch.push_back(b.null_branch ? 0 : flops_conv(b.spec));
    if (!b.null_branch) c.params += u64(b.adjacency.value.size());
  }

  std::uint64_t fixed = flops_affine(d.T * d.J, d.C, d.C) + kLayerNormFlopsPerElement * nodes;
  if (layer.residual) fixed += nodes;
  if (layer.base) {
    c.options = "+" + layer.base->spec.label() + "|" + c.options;
    c.params += u64(layer.base->adjacency.value.size());
    fixed += flops_conv(layer.base->spec) + nodes;
  }
  c.params += u64(layer.update_w.value.size() + layer.update_b.value.size() + layer.norm_gamma.value.size() +
                  layer.norm_beta.value.size());

  if (layer.selector) {
    const auto& s = *layer.selector;
    const std::size_t in = s.w1.value.shape()[1], hidden = s.w1.value.shape()[0];
    c.params += u64(s.w1.value.size() + s.b1.value.size() + s.w2.value.size() + s.b2.value.size());
    // pooling + MLP + relu + argmax
    c.selector_flops = nodes + flops_affine(1, in, hidden) + u64(hidden) + flops_affine(1, hidden, n) + n;
  }

  std::uint64_t all = 0;
  for (auto f : branch) all += f;
  const std::uint64_t combine = n > 1 ? 2 * n * nodes : 0;
  c.branch_flops_train = all;
  c.branch_evals_train = n;
  c.peak_elements_train = (n + 2) * nodes;
  c.train_flops = all + combine + c.selector_flops + fixed;

  if (layer.aggregation == gcnext::Aggregation::Select) {
    if (probs != nullptr && probs->size() == branch.size()) {
      double e = 0.0;
      for (std::size_t i = 0; i < branch.size(); ++i) e += (*probs)[i] * static_cast<double>(branch[i]);
      c.branch_flops_infer = static_cast<std::uint64_t>(std::llround(e));
    } else {
      c.branch_flops_infer = *std::max_element(branch.begin(), branch.end());
    }
    c.branch_evals_infer = 1;
    c.peak_elements_infer = 3 * nodes;
    c.infer_flops = c.branch_flops_infer + c.selector_flops + fixed;
  } else {
    c.branch_flops_infer = all;
    c.branch_evals_infer = n;
    c.peak_elements_infer = c.peak_elements_train;
    c.infer_flops = c.train_flops;
  }
  return c;
}

void add_into(LayerCost& t, const LayerCost& c) {
  t.params += c.params;
  t.train_flops += c.train_flops;
  t.infer_flops += c.infer_flops;
  t.branch_flops_train += c.branch_flops_train;
  t.branch_flops_infer += c.branch_flops_infer;
  t.selector_flops += c.selector_flops;
  t.branch_evals_train += c.branch_evals_train;
  t.branch_evals_infer += c.branch_evals_infer;
  t.peak_elements_train = std::max(t.peak_elements_train, c.peak_elements_train);
  t.peak_elements_infer = std::max(t.peak_elements_infer, c.peak_elements_infer);
}

}  // namespace

std::uint64_t flops_conv(const GraphConvSpec& spec) noexcept {
  const std::uint64_t g = u64(spec.graph_size());
  return 2 * u64(spec.diag_count()) * g * g;
}

std::uint64_t flops_affine(std::size_t rows, std::size_t in, std::size_t out) noexcept {
  return u64(rows) * (2 * u64(in) * u64(out) + u64(out));
}

CostReport cost_model(const gcnext::Model& model, const std::vector<std::vector<double>>* policy) {
  const auto& cfg = model.config;
  const Dims d = cfg.internal_dims();
  CostReport r;
  r.total.options = "-";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const std::vector<double>* probs = policy != nullptr && l < policy->size() ? &(*policy)[l] : nullptr;
    r.layers.push_back(layer_cost(model.layers[l], l, d, probs));
    add_into(r.total, r.layers.back());
  }
  const auto& sd = cfg.dims;
  r.head.options = "head";
  r.head.params = u64(model.head_w.value.size() + model.head_b.value.size());
  // input offset + scaling, output map, rescale + last-pose add
  r.head.train_flops = 2 * u64(sd.history * sd.joints * sd.channels) +
                       flops_affine(sd.future * sd.joints, sd.channels, sd.channels) +
                       2 * u64(sd.future * sd.joints * sd.channels);
  r.head.infer_flops = r.head.train_flops;
  return r;
}

std::string format_text(const CostReport& r) {
  std::string out;
  out += "# analytic cost, forward pass only; multiply-add = 2 FLOPs\n";
  char buf[256];
  std::size_t w = 12;
  for (const auto& c : r.layers) w = std::max(w, c.options.size());
  const int wi = static_cast<int>(w);
  std::snprintf(buf, sizeof buf, "%-6s %-*s %12s %14s %14s %8s %8s\n", "layer", wi, "options", "params",
                "train_flops", "infer_flops", "br_tr", "br_inf");
  out += buf;
  auto row = [&](const std::string& name, const LayerCost& c) {
    std::snprintf(buf, sizeof buf, "%-6s %-*s %12llu %14llu %14llu %8llu %8llu\n", name.c_str(), wi,
                  c.options.c_str(), static_cast<unsigned long long>(c.params),
                  static_cast<unsigned long long>(c.train_flops), static_cast<unsigned long long>(c.infer_flops),
                  static_cast<unsigned long long>(c.branch_evals_train),
                  static_cast<unsigned long long>(c.branch_evals_infer));
    out += buf;
  };
  for (const auto& c : r.layers) row(std::to_string(c.layer), c);
  row("total", r.total);
  row("head", r.head);
  std::snprintf(buf, sizeof buf, "model: params %llu, train_flops %llu, infer_flops %llu (infer/train %.3f)\n",
                static_cast<unsigned long long>(r.model_params()),
                static_cast<unsigned long long>(r.model_train_flops()),
                static_cast<unsigned long long>(r.model_infer_flops()),
                r.model_train_flops() == 0 ? 0.0
                                           : static_cast<double>(r.model_infer_flops()) /
                                                 static_cast<double>(r.model_train_flops()));
  out += buf;
  std::snprintf(buf, sizeof buf, "peak intermediate elements per layer: train %llu, infer %llu\n",
                static_cast<unsigned long long>(r.total.peak_elements_train),
                static_cast<unsigned long long>(r.total.peak_elements_infer));
  out += buf;
  return out;
}

std::string format_csv(const CostReport& r) {
  std::string out = "layer,kind_options,params,train_flops,infer_flops\n";
  auto row = [&](const std::string& name, const LayerCost& c) {
    out += name + "," + c.options + "," + std::to_string(c.params) + "," + std::to_string(c.train_flops) + "," +
           std::to_string(c.infer_flops) + "\n";
  };
  for (const auto& c : r.layers) row(std::to_string(c.layer), c);
  row("total", r.total);
  return out;
}

std::string emit_report(const CostReport& r, const std::filesystem::path& csv_path) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    f << text;
    if (!f) throw IoError("failed writing '" + p.string() + "'");
  };
  const std::string text = format_text(r);
  write(csv_path, format_csv(r));
  auto txt = csv_path;
  txt.replace_extension(".txt");
  write(txt, text);
  return text;
}

}  // namespace ugc::bench
