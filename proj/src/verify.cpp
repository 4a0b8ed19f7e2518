// SPDX-License-Identifier: Apache-2.0
#include "ugc/verify.hpp"

#include <algorithm>
#include <cstdio>

#include "ugc/autodiff.hpp"
#include "ugc/error.hpp"
#include "ugc/gcnext.hpp"
#include "ugc/random.hpp"

namespace ugc::verify {

namespace {

std::string dims_text(const Dims& d) {
  return "(T,J,C)=(" + std::to_string(d.T) + "," + std::to_string(d.J) + "," + std::to_string(d.C) + ")";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

SuiteResult named(std::string name) {
  SuiteResult r;
  r.name = std::move(name);
  return r;
}

void fail(SuiteResult& r, std::string what) {
  if (r.passed) r.failure = std::move(what);
  r.passed = false;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = uniform(rng, lo, hi);
  return t;
}

// Reference sum over all six indices of the masked dense adjacency.
Tensor six_loop(const Tensor& x, const Tensor& a, AxisSet diag, const Dims& d) {
  Tensor y({d.T, d.J, d.C});
  for (std::size_t t1 = 0; t1 < d.T; ++t1)
    for (std::size_t j1 = 0; j1 < d.J; ++j1)
      for (std::size_t c1 = 0; c1 < d.C; ++c1) {
        double s = 0.0;
        for (std::size_t t2 = 0; t2 < d.T; ++t2)
          for (std::size_t j2 = 0; j2 < d.J; ++j2)
            for (std::size_t c2 = 0; c2 < d.C; ++c2) {
              if (!mask_allows(diag, t1, j1, c1, t2, j2, c2)) continue;
              s += a.at({t1, j1, c1, t2, j2, c2}) * x.at({t2, j2, c2});
            }
        y.at({t1, j1, c1}) = s;
      }
  return y;
}

void randomize(gcnext::Model& m, Rng& rng, double scale) {
  for (auto* p : m.parameters())
    for (auto& v : p->value.data()) v = uniform(rng, -scale, scale);
}

}  // namespace

Tensor default_mask(const GraphConvSpec& spec) {
  return *build_mask(spec, spec.dims.nodes()).materialized;
}

SuiteResult mask_algebra(const MaskBuilder& build, std::size_t max_nodes) {
  SuiteResult r = named("mask-algebra");
  struct Identity {
    Kind product, lhs, rhs;
  };
  const Identity ids[] = {{Kind::S, Kind::SC, Kind::ST}, {Kind::T, Kind::TC, Kind::ST}, {Kind::C, Kind::SC, Kind::TC}};
  for (std::size_t T = 1; T <= max_nodes; ++T)
    for (std::size_t J = 1; T * J <= max_nodes; ++J)
      for (std::size_t C = 1; T * J * C <= max_nodes; ++C) {
        const Dims d{T, J, C};
        for (const auto& id : ids) {
          const Tensor p = build(GraphConvSpec::make(id.product, false, d));
          const Tensor l = build(GraphConvSpec::make(id.lhs, false, d));
          const Tensor q = build(GraphConvSpec::make(id.rhs, false, d));
          ++r.cases;
          if (!(p == elemwise_mul(l, q))) {
            fail(r, "M^" + std::string(kind_name(id.product)) + " != M^" + std::string(kind_name(id.lhs)) +
                        " * M^" + std::string(kind_name(id.rhs)) + " at " + dims_text(d));
          }
        }
      }
  r.report.push_back(std::to_string(r.cases) + " identities checked over all dims with TJC <= " +
                     std::to_string(max_nodes));
  return r;
}

SuiteResult factored_vs_dense(Dims dims, std::size_t seeds) {
  SuiteResult r = named("factored-vs-dense");
  for (Kind k : kAllKinds) {
    for (bool tied : {false, true}) {
      if (tied && k == Kind::General) continue;
      const auto spec = GraphConvSpec::make(k, tied, dims);
      const auto mask = build_mask(spec, dims.nodes());
      double worst_fm = 0.0, worst_mo = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(derive_seed(s, static_cast<std::uint64_t>(k), tied ? 1 : 0));
        AdjacencyStore store{spec, random_tensor(AdjacencyStore::block_shape(spec), rng)};
        const Tensor x = random_tensor({dims.T, dims.J, dims.C}, rng);
        const Tensor a = expand_to_global(store, dims.nodes());
        const Tensor yf = conv_factored(x, store);
        const Tensor ym = unigc_masked(x, a, mask);
        const Tensor yo = six_loop(x, a, spec.axes, dims);
        const double fm = max_abs_diff(yf, ym), mo = max_abs_diff(ym, yo);
        worst_fm = std::max(worst_fm, fm);
        worst_mo = std::max(worst_mo, mo);
        ++r.cases;
        if (!(fm < 1e-9) || !(mo < 1e-12)) {
          fail(r, spec.label() + " seed " + std::to_string(s) + " at " + dims_text(dims) +
                      ": |factored-masked| = " + fmt(fm) + ", |masked-six-loop| = " + fmt(mo));
        }
      }
      r.report.push_back(std::string(kind_name(k)) + (tied ? " tied  " : " untied") + ": " + std::to_string(seeds) +
                         " seeds, max |factored-masked| " + fmt(worst_fm) + ", max |masked-six-loop| " +
                         fmt(worst_mo));
    }
  }
  return r;
}

SuiteResult tying(Dims dims) {
  SuiteResult r = named("tying");
  for (Kind k : kAllKinds) {
    if (k == Kind::General) continue;
    const auto ts = GraphConvSpec::make(k, true, dims);
    const auto us = GraphConvSpec::make(k, false, dims);
    const std::size_t d = us.diag_count(), g = us.graph_size();
    Rng rng(derive_seed(static_cast<std::uint64_t>(k), 0x7469));
    AdjacencyStore tied{ts, random_tensor(AdjacencyStore::block_shape(ts), rng)};
    AdjacencyStore untied = AdjacencyStore::zeros(us);
    for (std::size_t b = 0; b < d; ++b)
      std::copy(tied.blocks.data().begin(), tied.blocks.data().end(), untied.blocks.data().begin() + b * g * g);
    const Tensor x = random_tensor({dims.T, dims.J, dims.C}, rng);
    ++r.cases;
    if (param_count(us) != d * param_count(ts)) {
      fail(r, std::string(kind_name(k)) + ": untied parameter count is not d x tied");
    }
    if (!(conv_factored(x, tied) == conv_factored(x, untied))) {
      fail(r, std::string(kind_name(k)) + ": tied and replicated untied stores disagree at " + dims_text(dims));
    }
    if (!(expand_to_global(tied, dims.nodes()) == expand_to_global(untied, dims.nodes()))) {
      fail(r, std::string(kind_name(k)) + ": tied and replicated untied expansions differ");
    }
    r.report.push_back(std::string(kind_name(k)) + ": params tied " + std::to_string(param_count(ts)) + ", untied " +
                       std::to_string(param_count(us)) + " (d = " + std::to_string(d) + ")");
  }
  return r;
}

SuiteResult zero_init_refine(std::size_t inputs) {
  SuiteResult r = named("zero-init-refine");
  gcnext::ModelConfig cfg;
  cfg.dims = {4, 3, 5, 3};
  cfg.layers = 3;
  cfg.hidden = 16;
  cfg.architecture = gcnext::Architecture::Single;
  cfg.base_kind = Kind::SC;
  gcnext::Model base = gcnext::build_model(cfg, 5);
  Rng rng(derive_seed(5, 0x7a69));
  randomize(base, rng, 0.5);
  gcnext::Model refined = gcnext::build_refine(base, {Kind::ST, Kind::SC, Kind::S, Kind::C}, 9);

  auto history = [&] { return random_tensor({cfg.dims.history, cfg.dims.joints, cfg.dims.channels}, rng, -300, 300); };
  for (std::size_t i = 0; i < inputs; ++i) {
    const Tensor h = history();
    ++r.cases;
    if (!(gcnext::predict(base, h) == gcnext::predict(refined, h))) {
      fail(r, "refined output differs from base on input " + std::to_string(i));
    }
  }
  // Nonzero new branches but routing forced to the null branch everywhere.
  for (auto& l : refined.layers)
    for (auto& b : l.candidates)
      if (!b.null_branch)
        for (auto& v : b.adjacency.value.data()) v = uniform(rng, -1, 1);
  const std::vector<std::size_t> null_route(cfg.layers, 1);
  for (std::size_t i = 0; i < inputs; ++i) {
    const Tensor h = history();
    ad::Tape tape;
    gcnext::ForwardOptions opts;
    opts.forced = &null_route;
    ++r.cases;
    if (!(gcnext::forward(tape, h, refined, opts).value() == gcnext::predict(base, h))) {
      fail(r, "null-branch routing differs from base on input " + std::to_string(i));
    }
  }
  r.report.push_back(std::to_string(inputs) + " inputs bit-identical after build, " + std::to_string(inputs) +
                     " with forced null routing");
  return r;
}

SuiteResult gradient_check() {
  SuiteResult r = named("gradient-check");
  auto check = [&](const std::string& label, gcnext::Model& m, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6764));
    randomize(m, rng, 0.4);
    const auto& d = m.config.dims;
    const Tensor h = random_tensor({d.history, d.joints, d.channels}, rng, -200, 200);
    const Tensor target = random_tensor({d.future, d.joints, d.channels}, rng, -200, 200);
    std::vector<double> noise(m.layers.size() * 8);
    for (auto& g : noise) g = gumbel(rng);
    auto build = [&](ad::Tape& tape) {
      gcnext::NoiseSource src(noise);
      gcnext::ForwardOptions opts;
      opts.mode = gcnext::Mode::Train;
      opts.hard = false;
      opts.tau = 0.7;
      opts.noise = &src;
      return ad::mpjpe_loss(gcnext::forward(tape, h, m, opts), tape.constant(target));
    };
    auto params = m.parameters();
    std::vector<ad::Parameter*> trainable;
    for (auto* p : params)
      if (p->trainable) trainable.push_back(p);
    const double err = ad::finite_diff_check(build, trainable, 1e-6);
    ++r.cases;
    if (!(err < 1e-5)) fail(r, label + ": max relative error " + fmt(err));
    r.report.push_back(label + ": max relative error " + fmt(err));
  };

  gcnext::ModelConfig cfg;
  cfg.dims = {2, 2, 3, 3};
  cfg.layers = 2;
  cfg.hidden = 6;
  cfg.tied = false;
  gcnext::Model dyn = gcnext::build_model(cfg, 3);
  check("dynamic, soft routing, untied", dyn, 3);

  cfg.tied = true;
  cfg.architecture = gcnext::Architecture::Single;
  gcnext::Model base = gcnext::build_model(cfg, 4);
  gcnext::Model ref = gcnext::build_refine(base, {Kind::ST, Kind::SC, Kind::C}, 4, false);
  check("refine, unfrozen base, tied", ref, 4);
  return r;
}

std::vector<SuiteResult> run_all() {
  std::vector<SuiteResult> out;
  auto guarded = [&](const char* name, auto fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      SuiteResult r = named(name);
      fail(r, std::string("exception: ") + e.what());
      out.push_back(std::move(r));
    }
  };
  guarded("mask-algebra", [] { return mask_algebra(); });
  guarded("factored-vs-dense", [] { return factored_vs_dense(); });
  guarded("tying", [] { return tying(); });
  guarded("zero-init-refine", [] { return zero_init_refine(); });
  guarded("gradient-check", [] { return gradient_check(); });
  return out;
}

bool print_results(const std::vector<SuiteResult>& results, std::ostream& os, bool verbose) {
  bool ok = true;
  for (const auto& r : results) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.cases << " cases)\n";
    if (verbose)
      for (const auto& line : r.report) os << "     " << line << "\n";
    if (!r.passed) os << "     first failure: " << r.failure << "\n";
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace ugc::verify
