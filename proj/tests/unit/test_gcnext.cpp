// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "ugc/error.hpp"
#include "ugc/gcnext.hpp"

using namespace ugc;
using namespace ugc::gcnext;

namespace {

ModelConfig small_config(Architecture arch = Architecture::Dynamic) {
  ModelConfig c;
  c.dims = motion::SequenceDims{3, 2, 2, 3};
  c.layers = 2;
  c.hidden = 8;
  c.architecture = arch;
  return c;
}

void randomize(ad::Parameter& p, std::uint64_t seed, double lo = -0.5, double hi = 0.5) {
  p.value = oracle::random(p.value.shape(), seed, lo, hi);
}

// Per-frame layer norm over the J*C features, written directly.
Tensor layer_norm_oracle(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t T = x.extent(0), F = x.extent(1) * x.extent(2);
  Tensor y(x.shape());
  for (std::size_t t = 0; t < T; ++t) {
    double mu = 0.0, var = 0.0;
    for (std::size_t k = 0; k < F; ++k) mu += x[t * F + k];
    mu /= static_cast<double>(F);
    for (std::size_t k = 0; k < F; ++k) var += (x[t * F + k] - mu) * (x[t * F + k] - mu);
    var /= static_cast<double>(F);
    for (std::size_t k = 0; k < F; ++k) y[t * F + k] = gamma[k] * (x[t * F + k] - mu) / std::sqrt(var + 1e-5) + beta[k];
  }
  return y;
}

Tensor history_for(const ModelConfig& c, std::uint64_t seed) {
  return oracle::random({c.dims.history, c.dims.joints, c.dims.channels}, seed, -300, 300);
}

motion::Dataset toy_data(const ModelConfig& c, std::size_t n, std::uint64_t first) {
  motion::SyntheticConfig sc;
  sc.dims = c.dims;
  return motion::gen_synthetic(sc, n, first);
}

Model random_base(std::uint64_t seed) {
  ModelConfig c = small_config(Architecture::Single);
  Model base = build_model(c, seed);
  randomize(base.head_w, seed + 1);
  randomize(base.head_b, seed + 2);
  for (std::size_t l = 0; l < base.layers.size(); ++l) {
    randomize(base.layers[l].norm_gamma, seed + 10 + l, 0.5, 1.5);
    randomize(base.layers[l].norm_beta, seed + 20 + l);
  }
  return base;
}

}  // namespace

TEST_SUITE("gcnext") {
  TEST_CASE("infer routing picks the argmax of the logits") {
    ad::Tape tape;
    ForwardOptions opts;
    const Routing r = route(tape.constant(Tensor({4}, {3, 1, 2, 0})), opts);
    CHECK(r.index == 0);
    CHECK(r.v.value() == Tensor({4}, {1, 0, 0, 0}));
    double s = 0.0;
    for (double p : r.probabilities) s += p;
    CHECK(s == doctest::Approx(1.0));
  }

  TEST_CASE("train routing is a one-hot Gumbel sample") {
    Rng rng(5);
    NoiseSource noise(rng);
    ForwardOptions opts;
    opts.mode = Mode::Train;
    opts.noise = &noise;
    std::size_t hits = 0;
    for (int i = 0; i < 10000; ++i) {
      ad::Tape tape;
      const Routing r = route(tape.leaf(Tensor({4}, {5, 0, 0, 0})), opts);
      double s = 0.0;
      int nz = 0;
      for (double e : r.v.value().data()) {
        s += e;
        nz += e != 0.0;
      }
      CHECK(s == 1.0);
      CHECK(nz == 1);
      hits += r.index == 0;
    }
    CHECK(hits > 9500);
    ad::Tape tape;
    ForwardOptions missing;
    missing.mode = Mode::Train;
    CHECK_THROWS_AS(route(tape.leaf(Tensor({2}, {0, 0})), missing), Error);
  }

  TEST_CASE("zeroed layer reduces to layer norm of the input") {
    Model m = build_model(small_config(), 3);
    zero_branches_and_updates(m);
    randomize(m.layers[0].norm_gamma, 4, 0.5, 1.5);
    randomize(m.layers[0].norm_beta, 5);
    const Tensor x = oracle::random({5, 2, 3}, 6);
    for (Mode mode : {Mode::Infer, Mode::Train}) {
      Rng rng(1);
      NoiseSource noise(rng);
      ForwardOptions opts;
      opts.mode = mode;
      opts.noise = &noise;
      ad::Tape tape;
      const Tensor y = layer_forward(tape.constant(x), m.layers[0], opts).value();
      CHECK(max_abs_diff(y, layer_norm_oracle(x, m.layers[0].norm_gamma.value, m.layers[0].norm_beta.value)) < 1e-12);
    }
  }

  TEST_CASE("layers preserve shape for every architecture and kind") {
    for (Architecture a : {Architecture::Dynamic, Architecture::AllAvg, Architecture::AllSum, Architecture::Single}) {
      ModelConfig c = small_config(a);
      c.options = {Kind::General, Kind::ST, Kind::SC, Kind::TC, Kind::S, Kind::T, Kind::C};
      c.tied = false;
      Model m = build_model(c, 7);
      const Tensor x = oracle::random({5, 2, 3}, 8);
      ad::Tape tape;
      ForwardOptions opts;
      for (auto& layer : m.layers) CHECK(layer_forward(tape.constant(x), layer, opts).shape() == x.shape());
      CHECK(predict(m, history_for(c, 9)).shape() == Shape{2, 2, 3});
    }
  }

  TEST_CASE("zeroed model predicts the zero-velocity baseline") {
    const ModelConfig c = small_config();
    Model zeroed = build_model(c, 10);
    zero_branches_and_updates(zeroed);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Tensor h = history_for(c, 100 + s);
      CHECK(predict(zeroed, h) == motion::zero_velocity(h, 2));
    }
  }

  TEST_CASE("constant history stays constant under the untrained model") {
    const ModelConfig c = small_config();
    Model m = build_model(c, 11);
    const Tensor pose = oracle::random({1, 2, 3}, 12, -300, 300);
    Tensor h({3, 2, 3});
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = pose[k % 6];
    const Tensor p = predict(m, h);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == pose[k % 6]);
  }

  TEST_CASE("history of the wrong length is a shape error") {
    Model m = build_model(small_config(), 12);
    CHECK_THROWS_AS(predict(m, Tensor({4, 2, 3})), ShapeError);
  }

  TEST_CASE("default option set and configuration checks") {
    const ModelConfig d;
    CHECK(d.options == std::vector<Kind>{Kind::ST, Kind::SC, Kind::S, Kind::C});
    ModelConfig bad = small_config();
    bad.options = {};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.options = {Kind::SC, Kind::SC};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.options = {Kind::SC};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("refinement starts bit-identical to its base") {
    Model base = random_base(20);
    Model ref = build_refine(base, {Kind::ST, Kind::SC, Kind::S, Kind::C}, 21);
    CHECK(ref.layers[0].candidates[1].null_branch);
    for (const auto& layer : ref.layers)
      for (const auto& b : layer.candidates)
        if (!b.null_branch) CHECK(b.adjacency.value == Tensor::zeros(b.adjacency.value.shape()));
    CHECK_FALSE(ref.layers[0].base->adjacency.trainable);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Tensor h = history_for(base.config, 300 + s);
      CHECK(predict(ref, h) == predict(base, h));
    }
  }

  TEST_CASE("base kind missing from the options becomes the leading null branch") {
    Model ref = build_refine(random_base(22), {Kind::ST, Kind::S}, 23);
    REQUIRE(ref.layers[0].candidates.size() == 3);
    CHECK(ref.layers[0].candidates[0].null_branch);
    CHECK(ref.layers[0].candidates[0].spec.kind() == Kind::SC);
  }

  TEST_CASE("null routing keeps the base output after the other branches move") {
    Model base = random_base(24);
    Model ref = build_refine(base, {Kind::ST, Kind::SC, Kind::S, Kind::C}, 25);
    std::uint64_t s = 26;
    for (auto& layer : ref.layers)
      for (auto& b : layer.candidates)
        if (!b.null_branch) randomize(b.adjacency, s++);
    const std::vector<std::size_t> forced(ref.layers.size(), 1);
    for (std::uint64_t k = 0; k < 10; ++k) {
      const Tensor h = history_for(base.config, 400 + k);
      ad::Tape tape;
      ForwardOptions opts;
      opts.forced = &forced;
      CHECK(forward(tape, h, ref, opts).value() == predict(base, h));
    }
  }

  TEST_CASE("refined layer equals the dense composition of base and masked delta") {
    Model base = random_base(30);
    Model ref = build_refine(base, {Kind::ST, Kind::SC, Kind::S, Kind::C}, 31);
    Layer& layer = ref.layers[0];
    randomize(layer.base->adjacency, 32);
    randomize(layer.update_w, 33);
    randomize(layer.update_b, 34);
    const Dims d = ref.config.internal_dims();
    for (std::size_t idx : {0u, 2u, 3u}) {
      Branch& br = layer.candidates[idx];
      randomize(br.adjacency, 40 + idx);
      const Tensor x = oracle::random(d.shape(), 50 + idx);
      const std::vector<std::size_t> forced{idx};
      ad::Tape tape;
      ForwardOptions opts;
      opts.forced = &forced;
      const Tensor got = layer_forward(tape.constant(x), layer, opts).value();

      const Tensor base6 = oracle::dense_from_blocks(Kind::SC, true, d.T, d.J, d.C, layer.base->adjacency.value);
      const Tensor delta6 = oracle::dense_from_blocks(br.spec.kind(), true, d.T, d.J, d.C, br.adjacency.value);
      const Tensor z = add(oracle::six_loop(x, base6, Kind::SC), oracle::six_loop(x, delta6, br.spec.kind()));
      Tensor pre(x.shape());
      const Tensor& w = layer.update_w.value;
      for (std::size_t n = 0; n < d.T * d.J; ++n)
        for (std::size_t o = 0; o < d.C; ++o) {
          double s = layer.update_b.value[o];
          for (std::size_t i = 0; i < d.C; ++i) s += w[o * d.C + i] * z[n * d.C + i];
          pre[n * d.C + o] = x[n * d.C + o] + s;
        }
      CHECK(max_abs_diff(got, layer_norm_oracle(pre, layer.norm_gamma.value, layer.norm_beta.value)) < 1e-9);
    }
  }

  TEST_CASE("refinement training does not increase the training loss") {
    Model base = random_base(60);
    Model ref = build_refine(base, {Kind::ST, Kind::SC, Kind::S, Kind::C}, 61);
    const auto train = toy_data(ref.config, 64, 0);
    const double before = dataset_loss(ref, train);
    TrainConfig tc;
    tc.iterations = 200;
    tc.batch_size = 8;
    tc.schedule = {1e-3, 1e-3, 1000};
    tc.eval_every = 200;
    tc.val_limit = 8;
    const auto w0 = ref.layers[0].base->adjacency.value;
    train_loop(ref, train, train, tc);
    CHECK(dataset_loss(ref, train) <= before);
    CHECK(ref.layers[0].base->adjacency.value == w0);
  }

  TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
    Model m = build_model(small_config(), 70);
    randomize(m.head_w, 71);
    const auto data = toy_data(m.config, 32, 0);
    std::vector<Tensor> before;
    for (auto* p : m.parameters()) before.push_back(p->value);
    const double l0 = dataset_loss(m, data);
    TrainConfig tc;
    tc.iterations = 5;
    tc.batch_size = 4;
    tc.schedule = {0.0, 0.0, 100};
    tc.eval_every = 5;
    tc.val_limit = 4;
    train_loop(m, data, data, tc);
    auto ps = m.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value == before[i]);
    CHECK(dataset_loss(m, data) == l0);
  }

  TEST_CASE("same seed gives identical metrics logs") {
    auto run = [] {
      Model m = build_model(small_config(), 80);
      const auto data = toy_data(m.config, 32, 0);
      TrainConfig tc;
      tc.iterations = 6;
      tc.batch_size = 4;
      tc.eval_every = 3;
      tc.val_limit = 4;
      std::string log = metrics_csv_header(m.config.dims.future);
      for (const auto& r : train_loop(m, data, data, tc).rows) log += metrics_csv_row(r);
      return log;
    };
    const std::string a = run();
    CHECK(a == run());
    CHECK(a.rfind("iteration,train_loss,val_mpjpe_avg,val_mpjpe_f1,val_mpjpe_f2", 0) == 0);
  }

  TEST_CASE("policy rows sum to one and forced logits give a forced policy") {
    Model m = build_model(small_config(), 90);
    const auto data = toy_data(m.config, 20, 0);
    for (const auto& row : policy_stats(m, data)) {
      REQUIRE(row.size() == 4);
      double s = 0.0;
      for (double v : row) s += v;
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    for (auto& layer : m.layers) {
      auto& sel = *layer.selector;
      sel.w2.value = Tensor::zeros(sel.w2.value.shape());
      sel.b2.value = Tensor({4}, {0, 0, 5, 0});
    }
    const auto pol = policy_stats(m, data);
    REQUIRE(pol.size() == m.layers.size());
    for (const auto& row : pol) CHECK(row[2] == 1.0);
  }

  TEST_CASE("all-avg over zeroed branches equals a single zeroed branch") {
    ModelConfig c = small_config();
    Model avg = build_static(c, Architecture::AllAvg, 100);
    Model one = build_static(c, Architecture::Single, 101);
    zero_branches_and_updates(avg);
    zero_branches_and_updates(one);
    for (std::size_t l = 0; l < c.layers; ++l) {
      randomize(avg.layers[l].update_b, 102 + l);
      one.layers[l].update_b.value = avg.layers[l].update_b.value;
    }
    randomize(avg.head_w, 110);
    one.head_w.value = avg.head_w.value;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Tensor h = history_for(c, 120 + s);
      CHECK(predict(avg, h) == predict(one, h));
    }
  }

  TEST_CASE("all-sum equals all-avg with every adjacency scaled by N") {
    ModelConfig c = small_config();
    Model sum = build_static(c, Architecture::AllSum, 130);
    Model avg = build_static(c, Architecture::AllAvg, 130);
    randomize(sum.head_w, 131);
    avg.head_w.value = sum.head_w.value;
    for (std::size_t l = 0; l < c.layers; ++l)
      for (std::size_t i = 0; i < 4; ++i)
        avg.layers[l].candidates[i].adjacency.value = scale(sum.layers[l].candidates[i].adjacency.value, 4.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Tensor h = history_for(c, 140 + s);
      CHECK(max_abs_diff(predict(sum, h), predict(avg, h)) < 1e-12);
    }
  }

  TEST_CASE("single-kind static model has no selector parameters") {
    Model m = build_static(small_config(), Architecture::Single, 150);
    for (const auto& layer : m.layers) {
      CHECK_FALSE(layer.selector.has_value());
      CHECK(layer.candidates.size() == 1);
    }
    for (const auto* p : m.parameters()) CHECK(p->name.find("selector") == std::string::npos);
  }

  TEST_CASE("inference evaluates one branch per layer, training evaluates all N") {
    Model m = build_model(small_config(), 160);
    std::vector<std::uint64_t> evals(m.layers.size(), 0);
    predict(m, history_for(m.config, 161), &evals);
    for (auto e : evals) CHECK(e == 1);

    std::vector<std::uint64_t> tr(m.layers.size(), 0);
    Rng rng(1);
    NoiseSource noise(rng);
    ForwardOptions opts;
    opts.mode = Mode::Train;
    opts.noise = &noise;
    opts.branch_evals = &tr;
    ad::Tape tape;
    forward(tape, history_for(m.config, 162), m, opts);
    for (auto e : tr) CHECK(e == 4);
  }

  TEST_CASE("train and infer agree under forced routing") {
    Model m = build_model(small_config(), 170);
    randomize(m.head_w, 171);
    for (std::size_t idx = 0; idx < 4; ++idx) {
      const std::vector<std::size_t> forced(m.layers.size(), idx);
      const Tensor h = history_for(m.config, 172 + idx);
      ad::Tape t1, t2;
      ForwardOptions inf;
      inf.forced = &forced;
      ForwardOptions tr = inf;
      tr.mode = Mode::Train;
      CHECK(max_abs_diff(forward(t1, h, m, inf).value(), forward(t2, h, m, tr).value()) < 1e-12);
    }
  }

  TEST_CASE("straight-through routing gives the selector a nonzero gradient") {
    Model m = build_model(small_config(), 180);
    randomize(m.head_w, 181);
    const auto data = toy_data(m.config, 8, 0);
    Rng rng(182);
    NoiseSource noise(rng);
    ForwardOptions opts;
    opts.mode = Mode::Train;
    opts.noise = &noise;
    m.zero_grad();
    ad::Tape tape;
    ad::Var total;
    for (const auto& s : data.samples) {
      ad::Var l = ad::mpjpe_loss(forward(tape, s.history, m, opts), tape.constant(s.future));
      total = total.valid() ? ad::add(total, l) : l;
    }
    tape.backward(total);
    for (auto& layer : m.layers) {
      double n1 = 0.0, n2 = 0.0;
      for (double g : layer.selector->w1.grad.data()) n1 += g * g;
      for (double g : layer.selector->w2.grad.data()) n2 += g * g;
      CHECK(n1 > 0.0);
      CHECK(n2 > 0.0);
    }
  }

  TEST_CASE("soft-routed dynamic model matches central differences") {
    ModelConfig c = small_config();
    c.tied = false;
    Model m = build_model(c, 190);
    randomize(m.head_w, 191);
    randomize(m.head_b, 192);
    const Tensor h = history_for(c, 193), fut = oracle::random({2, 2, 3}, 194, -300, 300);
    Rng rng(195);
    NoiseSource rec(rng, true);
    {
      ad::Tape tape;
      ForwardOptions opts;
      opts.mode = Mode::Train;
      opts.hard = false;
      opts.noise = &rec;
      forward(tape, h, m, opts);
    }
    NoiseSource replay(rec.recorded());
    auto params = m.parameters();
    const double err = ad::finite_diff_check(
        [&](ad::Tape& tape) {
          replay.rewind();
          ForwardOptions opts;
          opts.mode = Mode::Train;
          opts.hard = false;
          opts.tau = 0.7;
          opts.noise = &replay;
          return ad::mpjpe_loss(forward(tape, h, m, opts), tape.constant(fut));
        },
        params);
    CHECK(err < 1e-5);
  }

  TEST_CASE("temperature schedule") {
    TrainConfig tc;
    CHECK(temperature(tc, 0) == 1.0);
    CHECK(temperature(tc, 4999) == 1.0);
    tc.anneal = true;
    CHECK(temperature(tc, 0) == doctest::Approx(5.0));
    CHECK(temperature(tc, tc.iterations - 1) == doctest::Approx(0.5));
  }

  TEST_CASE("parameter names are unique") {
    Model m = build_refine(random_base(200), {Kind::ST, Kind::SC, Kind::S, Kind::C}, 201);
    std::vector<std::string> names;
    for (const auto* p : m.parameters()) names.push_back(p->name);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    CHECK(m.find("layer0.base.sc.adj") != nullptr);
  }
}
