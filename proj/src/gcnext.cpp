// SPDX-License-Identifier: Apache-2.0
#include "ugc/gcnext.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ugc::gcnext {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;    // "init"
constexpr std::uint64_t kBatchStream = 0x62617463;   // "batc"
constexpr std::uint64_t kRefineStream = 0x72656669;  // "refi"

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

Branch make_branch(std::string name, Kind kind, const ModelConfig& cfg, bool null_branch, bool trainable) {
  const auto spec = GraphConvSpec::make(kind, cfg.tied && kind != Kind::General, cfg.internal_dims());
  Branch b{spec, NodeLayout::of(spec), {}, null_branch};
  if (!null_branch) b.adjacency = ad::Parameter(std::move(name), Tensor(AdjacencyStore::block_shape(spec)), trainable);
  return b;
}

Selector make_selector(const std::string& prefix, const ModelConfig& cfg, std::size_t n) {
  const auto& d = cfg.dims;
  const std::size_t in = cfg.pooling == Pooling::Joints ? d.frames() * d.channels : d.channels;
  Selector s;
  s.pooling = cfg.pooling;
  s.w1 = ad::Parameter(prefix + "selector.w1", Tensor({cfg.hidden, in}));
  s.b1 = ad::Parameter(prefix + "selector.b1", Tensor({cfg.hidden}));
  s.w2 = ad::Parameter(prefix + "selector.w2", Tensor({n, cfg.hidden}));
  s.b2 = ad::Parameter(prefix + "selector.b2", Tensor({n}));
  return s;
}

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (auto& v : t.data()) v = uniform(rng, -bound, bound);
}

Tensor one_hot(std::size_t n, std::size_t k) {
  Tensor t({n});
  t[k] = 1.0;
  return t;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void bump(const ForwardOptions& opts, std::size_t layer, std::uint64_t n) {
  if (opts.branch_evals == nullptr) return;
  if (opts.branch_evals->size() <= layer) opts.branch_evals->resize(layer + 1, 0);
  (*opts.branch_evals)[layer] += n;
}

}  // namespace

std::string_view architecture_name(Architecture a) noexcept {
  switch (a) {
    case Architecture::Dynamic: return "dynamic";
    case Architecture::AllAvg: return "all-avg";
    case Architecture::AllSum: return "all-sum";
    case Architecture::Single: return "single";
    case Architecture::Refine: return "refine";
  }
  return "?";
}

std::optional<Architecture> architecture_from_name(std::string_view s) noexcept {
  for (auto a : {Architecture::Dynamic, Architecture::AllAvg, Architecture::AllSum, Architecture::Single,
                 Architecture::Refine}) {
    if (architecture_name(a) == s) return a;
  }
  return std::nullopt;
}

std::string_view pooling_name(Pooling p) noexcept { return p == Pooling::Joints ? "pool-joints" : "pool-all"; }

std::optional<Pooling> pooling_from_name(std::string_view s) noexcept {
  if (s == "pool-joints") return Pooling::Joints;
  if (s == "pool-all") return Pooling::All;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (dims.history == 0 || dims.future == 0 || dims.joints == 0 || dims.channels == 0) {
    throw ConfigError("model dims must be positive");
  }
  if (options.empty()) throw ConfigError("option set must not be empty");
  for (std::size_t i = 0; i < options.size(); ++i)
    for (std::size_t k = i + 1; k < options.size(); ++k)
      if (options[i] == options[k]) throw ConfigError("option set lists a kind twice");
  if (architecture == Architecture::Dynamic && options.size() < 2) {
    throw ConfigError("a dynamic model needs at least two options");
  }
  if (hidden == 0) throw ConfigError("selector hidden width must be positive");
  if (!(coord_scale > 0)) throw ConfigError("coordinate scale must be positive");
}

// -- Model -----------------------------------------------------------------------------

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& l : layers) {
    if (l.base) out.push_back(&l.base->adjacency);
    for (auto& b : l.candidates)
      if (!b.null_branch) out.push_back(&b.adjacency);
    if (l.selector) {
      out.insert(out.end(), {&l.selector->w1, &l.selector->b1, &l.selector->w2, &l.selector->b2});
    }
    out.insert(out.end(), {&l.update_w, &l.update_b, &l.norm_gamma, &l.norm_beta});
  }
  out.insert(out.end(), {&head_w, &head_b});
  return out;
}

std::vector<const ad::Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

ad::Parameter* Model::find(std::string_view name) {
  for (auto* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

std::vector<double> NoiseSource::draw(std::size_t n) {
  std::vector<double> out(n);
  if (rng_ != nullptr) {
    for (auto& g : out) g = gumbel(*rng_);
    if (record_) values_.insert(values_.end(), out.begin(), out.end());
    return out;
  }
  if (cursor_ + n > values_.size()) throw Error("NoiseSource: replay exhausted");
  std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(cursor_), n, out.begin());
  cursor_ += n;
  return out;
}

// -- forward -----------------------------------------------------------------------------

ad::Var selector_logits(ad::Var x, Selector& s) {
  ad::Tape& t = x.tape();
  const auto& shape = x.shape();
  ad::Var feat = s.pooling == Pooling::Joints ? ad::mean_over_axes(x, {1}) : ad::mean_over_axes(x, {0, 1});
  if (s.pooling == Pooling::Joints) feat = ad::reshape(feat, {shape[0] * shape[2]});
  ad::Var h = ad::relu(ad::affine(feat, t.param(s.w1), t.param(s.b1)));
  return ad::affine(h, t.param(s.w2), t.param(s.b2));
}

Routing route(ad::Var logits, const ForwardOptions& opts) {
  ad::Tape& t = logits.tape();
  const auto& lv = logits.value();
  const std::size_t n = lv.size();
  Routing r;
  {
    // Noise-free probabilities for reporting.
    const double m = *std::max_element(lv.data().begin(), lv.data().end());
    double tot = 0.0;
    r.probabilities.resize(n);
    for (std::size_t i = 0; i < n; ++i) tot += (r.probabilities[i] = std::exp(lv[i] - m));
    for (auto& p : r.probabilities) p /= tot;
  }
  if (opts.mode == Mode::Infer) {
    r.index = argmax(lv.data());
    r.v = t.constant(one_hot(n, r.index));
    return r;
  }
  if (opts.noise == nullptr) throw Error("route: train mode needs a noise source");
  const auto g = opts.noise->draw(n);
  r.v = ad::gumbel_softmax_st(logits, opts.tau, g, opts.hard);
  r.index = argmax(r.v.value().data());
  return r;
}

Routing select(ad::Var x, Selector& s, const ForwardOptions& opts) { return route(selector_logits(x, s), opts); }

ad::Var layer_forward(ad::Var x, Layer& layer, const ForwardOptions& opts, std::size_t layer_index) {
  ad::Tape& t = x.tape();
  const Shape shape = x.shape();
  if (shape.size() != 3) throw ShapeError("layer_forward: input must be (T,J,C)");
  const std::size_t T = shape[0], J = shape[1], C = shape[2];
  const std::size_t n = layer.candidates.size();

  auto eval_branch = [&](std::size_t i) -> ad::Var {
    Branch& b = layer.candidates[i];
    if (b.null_branch) return t.constant(Tensor(shape));
    return ad::graph_conv(x, t.param(b.adjacency), b.spec, b.layout);
  };
  auto eval_all = [&] {
    std::vector<ad::Var> ys;
    ys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ys.push_back(eval_branch(i));
    bump(opts, layer_index, n);
    return ys;
  };

  ad::Var z;
  if (layer.aggregation == Aggregation::Select) {
    std::size_t index = 0;
    ad::Var v;
    if (opts.forced != nullptr) {
      index = opts.forced->at(layer_index);
      if (index >= n) throw Error("forced routing index out of range");
      v = t.constant(one_hot(n, index));
    } else {
      if (!layer.selector) throw Error("layer_forward: select aggregation without a selector");
      Routing r = select(x, *layer.selector, opts);
      index = r.index;
      v = r.v;
    }
    if (opts.chosen != nullptr) opts.chosen->push_back(index);
    if (opts.mode == Mode::Infer) {
      z = eval_branch(index);
      bump(opts, layer_index, 1);
    } else {
      auto ys = eval_all();
      z = ad::weighted_sum(v, ys);
    }
  } else if (n == 1) {
    z = eval_branch(0);
    bump(opts, layer_index, 1);
  } else {
    const double w = layer.aggregation == Aggregation::Average ? 1.0 / static_cast<double>(n) : 1.0;
    auto ys = eval_all();
    z = ad::weighted_sum(t.constant(Tensor({n}, w)), ys);
  }

  if (layer.base) {
    ad::Var base = ad::graph_conv(x, t.param(layer.base->adjacency), layer.base->spec, layer.base->layout);
    z = ad::add(base, z);
  }

  ad::Var u = ad::affine(ad::reshape(z, {T * J, C}), t.param(layer.update_w), t.param(layer.update_b));
  u = ad::reshape(u, shape);
  ad::Var pre = layer.residual ? ad::add(x, u) : u;
  ad::Var normed = ad::layer_norm(ad::reshape(pre, {T, J * C}), t.param(layer.norm_gamma), t.param(layer.norm_beta));
  return ad::reshape(normed, shape);
}

Tensor prepare_input(const Tensor& history, const ModelConfig& cfg) {
  const auto& d = cfg.dims;
  if (history.shape() != Shape{d.history, d.joints, d.channels}) {
    throw ShapeError("history " + shape_to_string(history.shape()) + " does not match model dims (" +
                     std::to_string(d.history) + "," + std::to_string(d.joints) + "," +
                     std::to_string(d.channels) + ")");
  }
  const std::size_t pose = d.joints * d.channels;
  const std::size_t last = (d.history - 1) * pose;
  const double inv = 1.0 / cfg.coord_scale;
  Tensor out({d.frames(), d.joints, d.channels});
  for (std::size_t f = 0; f < d.history; ++f)
    for (std::size_t k = 0; k < pose; ++k) out[f * pose + k] = (history[f * pose + k] - history[last + k]) * inv;
  // Padded frames replicate the last pose, i.e. zero offset.
  return out;
}

ad::Var forward(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts) {
  const auto& cfg = model.config;
  const auto& d = cfg.dims;
  ad::Var h = tape.constant(prepare_input(history, cfg));
  for (std::size_t l = 0; l < model.layers.size(); ++l) h = layer_forward(h, model.layers[l], opts, l);
  ad::Var fut = ad::slice_rows(h, d.history, d.future);
  ad::Var o = ad::affine(ad::reshape(fut, {d.future * d.joints, d.channels}), tape.param(model.head_w),
                         tape.param(model.head_b));
  o = ad::scale(ad::reshape(o, {d.future, d.joints, d.channels}), cfg.coord_scale);
  return ad::add(o, tape.constant(motion::zero_velocity(history, d.future)));
}

ad::Var forward_scratch(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts) {
  if (model.config.architecture == Architecture::Refine) throw Error("forward_scratch: model is a refinement");
  return forward(tape, history, model, opts);
}

ad::Var forward_refine(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts) {
  if (model.config.architecture != Architecture::Refine) throw Error("forward_refine: model is not a refinement");
  return forward(tape, history, model, opts);
}

Tensor predict(Model& model, const Tensor& history, std::vector<std::uint64_t>* branch_evals,
               std::vector<std::size_t>* chosen) {
  ad::Tape tape;
  ForwardOptions opts;
  opts.mode = Mode::Infer;
  opts.branch_evals = branch_evals;
  opts.chosen = chosen;
  return forward(tape, history, model, opts).value();
}

// -- construction ---------------------------------------------------------------------

Model build_skeleton(const ModelConfig& cfg) {
  cfg.validate();
  const auto& d = cfg.dims;
  const std::size_t C = d.channels;
  const bool refine = cfg.architecture == Architecture::Refine;
  const bool base_trainable = !(refine && cfg.freeze_base);

  std::vector<Kind> options = cfg.options;
  if (cfg.architecture == Architecture::Single) options = {cfg.base_kind};
  if (refine && std::find(options.begin(), options.end(), cfg.base_kind) == options.end()) {
    options.insert(options.begin(), cfg.base_kind);
  }

  Model m;
  m.config = cfg;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    Layer layer;
    if (refine) {
      layer.base = make_branch(pre + "base." + std::string(kind_name(cfg.base_kind)) + ".adj", cfg.base_kind, cfg,
                               false, base_trainable);
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
      const bool null_branch = refine && options[i] == cfg.base_kind;
      layer.candidates.push_back(make_branch(
          pre + "branch" + std::to_string(i) + "." + std::string(kind_name(options[i])) + ".adj", options[i], cfg,
          null_branch, true));
    }
    switch (cfg.architecture) {
      case Architecture::Dynamic:
      case Architecture::Refine:
        layer.aggregation = Aggregation::Select;
        layer.selector = make_selector(pre, cfg, options.size());
        break;
      case Architecture::AllAvg: layer.aggregation = Aggregation::Average; break;
      case Architecture::AllSum:
      case Architecture::Single: layer.aggregation = Aggregation::Sum; break;
    }
    layer.residual = cfg.residual;
    layer.update_w = ad::Parameter(pre + "update.w", Tensor({C, C}), base_trainable);
    layer.update_b = ad::Parameter(pre + "update.b", Tensor({C}), base_trainable);
    layer.norm_gamma = ad::Parameter(pre + "norm.gamma", Tensor({d.joints * C}, 1.0), base_trainable);
    layer.norm_beta = ad::Parameter(pre + "norm.beta", Tensor({d.joints * C}), base_trainable);
    m.layers.push_back(std::move(layer));
  }
  m.head_w = ad::Parameter("head.w", Tensor({C, C}), base_trainable);
  m.head_b = ad::Parameter("head.b", Tensor({C}), base_trainable);
  return m;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.architecture == Architecture::Refine) throw Error("build_model: a refinement needs a base model");
  Model m = build_skeleton(cfg);
  Rng rng(derive_seed(seed, kInitStream));
  const double c_bound = 1.0 / std::sqrt(static_cast<double>(cfg.dims.channels));
  for (auto& layer : m.layers) {
    for (auto& b : layer.candidates) {
      fill_uniform(b.adjacency.value, rng, 1.0 / std::sqrt(static_cast<double>(b.spec.graph_size())));
    }
    if (layer.selector) {
      auto& s = *layer.selector;
      fill_uniform(s.w1.value, rng, 1.0 / std::sqrt(static_cast<double>(s.w1.value.shape()[1])));
      fill_uniform(s.w2.value, rng, 1.0 / std::sqrt(static_cast<double>(s.w2.value.shape()[1])));
    }
    fill_uniform(layer.update_w.value, rng, c_bound);
  }
  fill_uniform(m.head_w.value, rng, c_bound);
  return m;
}

Model build_dynamic(ModelConfig cfg, std::uint64_t seed) {
  cfg.architecture = Architecture::Dynamic;
  return build_model(cfg, seed);
}

Model build_static(ModelConfig cfg, Architecture aggregate, std::uint64_t seed) {
  if (aggregate != Architecture::Single && aggregate != Architecture::AllAvg && aggregate != Architecture::AllSum) {
    throw ConfigError("build_static: aggregate must be single, all-avg or all-sum");
  }
  cfg.architecture = aggregate;
  return build_model(cfg, seed);
}

Model build_refine(const Model& base, std::vector<Kind> options, std::uint64_t seed, bool freeze_base) {
  if (base.config.architecture != Architecture::Single) {
    throw Error("build_refine: the base must be a single-kind static model");
  }
  ModelConfig cfg = base.config;
  cfg.architecture = Architecture::Refine;
  cfg.options = std::move(options);
  cfg.freeze_base = freeze_base;
  Model m = build_skeleton(cfg);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& dst = m.layers[l];
    const auto& src = base.layers[l];
    dst.base->adjacency.value = src.candidates.at(0).adjacency.value;
    dst.update_w.value = src.update_w.value;
    dst.update_b.value = src.update_b.value;
    dst.norm_gamma.value = src.norm_gamma.value;
    dst.norm_beta.value = src.norm_beta.value;
  }
  m.head_w.value = base.head_w.value;
  m.head_b.value = base.head_b.value;

  Rng rng(derive_seed(seed, kRefineStream));
  for (auto& layer : m.layers) {
    auto& s = *layer.selector;
    fill_uniform(s.w1.value, rng, 1.0 / std::sqrt(static_cast<double>(s.w1.value.shape()[1])));
    fill_uniform(s.w2.value, rng, 1.0 / std::sqrt(static_cast<double>(s.w2.value.shape()[1])));
  }
  return m;
}

void zero_branches_and_updates(Model& model) {
  auto zero = [](ad::Parameter& p) { std::fill(p.value.data().begin(), p.value.data().end(), 0.0); };
  for (auto& l : model.layers) {
    if (l.base) zero(l.base->adjacency);
    for (auto& b : l.candidates)
      if (!b.null_branch) zero(b.adjacency);
    zero(l.update_w);
    zero(l.update_b);
  }
}

// -- evaluation ---------------------------------------------------------------------

EvalResult evaluate(Model& model, const motion::Dataset& ds, std::size_t limit) {
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  const std::size_t L = model.layers.size();
  EvalResult r;
  r.per_frame.assign(model.config.dims.future, 0.0);
  std::vector<std::vector<double>> counts(L);
  for (std::size_t l = 0; l < L; ++l) counts[l].assign(model.layers[l].candidates.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> chosen;
    const Tensor pred = predict(model, ds.samples[i].history, nullptr, &chosen);
    const auto pf = motion::mpjpe_per_frame(pred, ds.samples[i].future);
    for (std::size_t f = 0; f < pf.size(); ++f) r.per_frame[f] += pf[f];
    std::size_t k = 0;
    for (std::size_t l = 0; l < L; ++l)
      if (model.layers[l].aggregation == Aggregation::Select) counts[l][chosen.at(k++)] += 1.0;
  }
  for (auto& v : r.per_frame) v /= static_cast<double>(std::max<std::size_t>(n, 1));
  r.average = 0.0;
  for (double v : r.per_frame) r.average += v;
  r.average /= static_cast<double>(std::max<std::size_t>(r.per_frame.size(), 1));
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t nc = counts[l].size();
    if (model.layers[l].aggregation != Aggregation::Select || n == 0) {
      counts[l].assign(nc, 1.0 / static_cast<double>(nc));
    } else {
      for (auto& c : counts[l]) c /= static_cast<double>(n);
    }
  }
  r.policy = std::move(counts);
  return r;
}

EvalResult evaluate_zero_velocity(const motion::Dataset& ds, std::size_t limit) {
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  EvalResult r;
  r.per_frame.assign(ds.dims.future, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pf = motion::mpjpe_per_frame(motion::zero_velocity(ds.samples[i].history, ds.dims.future),
                                            ds.samples[i].future);
    for (std::size_t f = 0; f < pf.size(); ++f) r.per_frame[f] += pf[f];
  }
  for (auto& v : r.per_frame) v /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (double v : r.per_frame) r.average += v;
  r.average /= static_cast<double>(std::max<std::size_t>(r.per_frame.size(), 1));
  return r;
}

std::vector<std::vector<double>> policy_stats(Model& model, const motion::Dataset& ds) {
  return evaluate(model, ds).policy;
}

double dataset_loss(Model& model, const motion::Dataset& ds, std::size_t limit) {
  const std::size_t n = limit == 0 ? ds.size() : std::min(limit, ds.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ad::Tape tape;
    ForwardOptions opts;
    ad::Var pred = forward(tape, ds.samples[i].history, model, opts);
    s += ad::mpjpe_loss(pred, tape.constant(ds.samples[i].future)).value()[0];
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

// -- training -----------------------------------------------------------------------

double temperature(const TrainConfig& cfg, std::size_t iteration) noexcept {
  if (!cfg.anneal) return cfg.tau;
  const double span = cfg.iterations > 1 ? static_cast<double>(cfg.iterations - 1) : 1.0;
  const double frac = std::min(1.0, static_cast<double>(iteration) / span);
  return cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, frac);
}

TrainResult train_loop(Model& model, const motion::Dataset& train, const motion::Dataset& val,
                       const TrainConfig& cfg, ad::Adam* optimizer,
                       const std::function<void(const MetricsRow&)>& on_row) {
  if (train.empty()) throw ConfigError("train_loop: training set is empty");
  if (cfg.eval_every == 0) throw ConfigError("train_loop: eval_every must be positive");
  ad::Adam local(cfg.adam, cfg.schedule);
  ad::Adam& opt = optimizer != nullptr ? *optimizer : local;
  auto params = model.parameters();
  motion::BatchSampler sampler(train.size(), cfg.batch_size, derive_seed(cfg.seed, kBatchStream));

  TrainResult result;
  double loss_acc = 0.0;
  std::size_t loss_n = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto batch = sampler.next();
    model.zero_grad();
    const double tau = temperature(cfg, it);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    double batch_loss = 0.0;
    for (std::size_t idx : batch) {
      const auto& s = train.samples[idx];
      Rng rng(derive_seed(cfg.seed, it, idx));
      NoiseSource noise(rng);
      ForwardOptions opts;
      opts.mode = Mode::Train;
      opts.tau = tau;
      opts.noise = &noise;
      ad::Tape tape;
      ad::Var pred = forward(tape, s.history, model, opts);
      ad::Var loss = ad::mpjpe_loss(pred, tape.constant(s.future));
      const double lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw NumericError("training diverged: non-finite loss at iteration " + std::to_string(it) +
                           " (sample " + std::to_string(idx) + ")");
      }
      batch_loss += lv;
      tape.backward(ad::scale(loss, inv_b));
    }
    opt.step(params, it);
    loss_acc += batch_loss * inv_b;
    ++loss_n;

    if ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      MetricsRow row;
      row.iteration = it + 1;
      row.train_loss = loss_acc / static_cast<double>(loss_n);
      if (!val.empty()) {
        auto ev = evaluate(model, val, cfg.val_limit);
        row.val_per_frame = std::move(ev.per_frame);
        row.val_average = ev.average;
      }
      loss_acc = 0.0;
      loss_n = 0;
      if (on_row) on_row(row);
      result.final_val = row.val_average;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string metrics_csv_header(std::size_t horizon) {
  std::string s = "iteration,train_loss,val_mpjpe_avg";
  for (std::size_t f = 1; f <= horizon; ++f) s += ",val_mpjpe_f" + std::to_string(f);
  return s;
}

std::string metrics_csv_row(const MetricsRow& row) {
  char buf[64];
  std::string s = std::to_string(row.iteration);
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.10g", v);
    s += buf;
  };
  put(row.train_loss);
  put(row.val_average);
  for (double v : row.val_per_frame) put(v);
  return s;
}

}  // namespace ugc::gcnext
