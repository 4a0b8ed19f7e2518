// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ugc/autodiff.hpp"
#include "ugc/graph_conv.hpp"
#include "ugc/motion.hpp"

namespace ugc::gcnext {

enum class Mode { Train, Infer };
enum class Pooling { Joints, All };
enum class Aggregation { Select, Average, Sum };
/// Dynamic: selector-routed layers. AllAvg/AllSum: every branch, fixed weights.
/// Single: one fixed graph convolution per layer (also the base of a refinement).
/// Refine: frozen single-kind base plus zero-initialized dynamic branches.
enum class Architecture { Dynamic, AllAvg, AllSum, Single, Refine };

std::string_view architecture_name(Architecture a) noexcept;
std::optional<Architecture> architecture_from_name(std::string_view s) noexcept;
std::string_view pooling_name(Pooling p) noexcept;
std::optional<Pooling> pooling_from_name(std::string_view s) noexcept;

struct ModelConfig {
  motion::SequenceDims dims;
  std::size_t layers = 8;
  std::vector<Kind> options = {Kind::ST, Kind::SC, Kind::S, Kind::C};
  bool tied = true;
  Architecture architecture = Architecture::Dynamic;
  Kind base_kind = Kind::SC;  // the single kind of a static stack / refinement base
  Pooling pooling = Pooling::Joints;
  std::size_t hidden = 64;
  bool residual = true;
  double coord_scale = 100.0;  // mm per internal unit
  bool freeze_base = true;

  /// Internal sequence extents (T_h + T_f, J, C).
  Dims internal_dims() const { return Dims{dims.frames(), dims.joints, dims.channels}; }
  /// Throws ConfigError for empty option sets, zero extents and the like.
  void validate() const;
};

/// One candidate graph convolution. A null branch outputs exact zeros and owns no parameters.
struct Branch {
  GraphConvSpec spec;
  NodeLayout layout;
  ad::Parameter adjacency;
  bool null_branch = false;
};

/// Average pooling followed by a one-hidden-layer relu MLP producing N logits.
struct Selector {
  Pooling pooling = Pooling::Joints;
  ad::Parameter w1, b1, w2, b2;
};

struct Layer {
  std::optional<Branch> base;  // refinement only: the locked original graph convolution
  std::vector<Branch> candidates;
  std::optional<Selector> selector;
  Aggregation aggregation = Aggregation::Select;
  bool residual = true;
  ad::Parameter update_w, update_b;  // C x C channel map + bias
  ad::Parameter norm_gamma, norm_beta;  // over the J*C features of each frame
};

class Model {
 public:
  ModelConfig config;
  std::vector<Layer> layers;
  ad::Parameter head_w, head_b;  // C x C output map applied to the predicted frames

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  ad::Parameter* find(std::string_view name);
  void zero_grad();
  std::size_t parameter_count() const;
};

/// Gumbel noise either drawn from an RNG (optionally recorded) or replayed.
class NoiseSource {
 public:
  explicit NoiseSource(Rng& rng, bool record = false) : rng_(&rng), record_(record) {}
  explicit NoiseSource(std::vector<double> replay) : values_(std::move(replay)) {}

  std::vector<double> draw(std::size_t n);
  const std::vector<double>& recorded() const noexcept { return values_; }
  /// Restart replay from the beginning.
  void rewind() noexcept { cursor_ = 0; }

 private:
  Rng* rng_ = nullptr;
  bool record_ = false;
  std::vector<double> values_;
  std::size_t cursor_ = 0;
};

struct ForwardOptions {
  Mode mode = Mode::Infer;
  double tau = 1.0;
  bool hard = true;                  // train mode: straight-through one-hot; false gives soft weights
  NoiseSource* noise = nullptr;      // train mode requires it for selector layers
  const std::vector<std::size_t>* forced = nullptr;  // per-layer forced branch index
  std::vector<std::uint64_t>* branch_evals = nullptr;  // per-layer counters, incremented
  std::vector<std::size_t>* chosen = nullptr;          // per-layer selected index, appended
};

struct Routing {
  ad::Var v;  // length N: one-hot (hard / infer / forced) or soft
  std::vector<double> probabilities;  // softmax of the logits (no noise)
  std::size_t index = 0;
};

/// Selector logits for layer input x (T,J,C).
ad::Var selector_logits(ad::Var x, Selector& s);
/// Routing from logits: infer -> argmax one-hot, train -> Gumbel softmax (ST when hard).
Routing route(ad::Var logits, const ForwardOptions& opts);
Routing select(ad::Var x, Selector& s, const ForwardOptions& opts);

/// One dynamic layer. Output shape equals input shape.
ad::Var layer_forward(ad::Var x, Layer& layer, const ForwardOptions& opts, std::size_t layer_index = 0);

/// Replicate-pad the history to T_h + T_f frames and express it relative to the
/// last observed pose in internal units.
Tensor prepare_input(const Tensor& history, const ModelConfig& cfg);
/// Full model: prepared input -> L layers -> channel map on the future frames,
/// scaled back to mm and added to the last observed pose.
ad::Var forward(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts);
/// forward() for scratch-mode models; throws on a refinement model.
ad::Var forward_scratch(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts);
/// forward() for refinement models; throws otherwise.
ad::Var forward_refine(ad::Tape& tape, const Tensor& history, Model& model, const ForwardOptions& opts);
/// Deterministic inference (argmax routing).
Tensor predict(Model& model, const Tensor& history, std::vector<std::uint64_t>* branch_evals = nullptr,
               std::vector<std::size_t>* chosen = nullptr);

/// Scratch models: Dynamic, AllAvg, AllSum or Single per cfg.architecture.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);
Model build_dynamic(ModelConfig cfg, std::uint64_t seed);
/// Ablation baselines: single-kind stack (aggregate empty) or all-avg / all-sum bodies.
Model build_static(ModelConfig cfg, Architecture aggregate, std::uint64_t seed);
/// Wraps a single-kind base: every layer gains the option set with the base kind as
/// the null branch and all other adjacencies at exactly zero.
Model build_refine(const Model& base, std::vector<Kind> options, std::uint64_t seed, bool freeze_base = true);
/// Architecture-only skeleton (all values zero), used before loading a checkpoint.
Model build_skeleton(const ModelConfig& cfg);

/// Zero every adjacency and update parameter (keeps norms, selectors and the head).
void zero_branches_and_updates(Model& model);

/// Per layer, fraction of samples routed to each candidate at inference. Layers
/// without a selector report the uniform row.
std::vector<std::vector<double>> policy_stats(Model& model, const motion::Dataset& ds);

struct EvalResult {
  std::vector<double> per_frame;  // mm, averaged over samples
  double average = 0.0;
  std::vector<std::vector<double>> policy;
};

EvalResult evaluate(Model& model, const motion::Dataset& ds, std::size_t limit = 0);
EvalResult evaluate_zero_velocity(const motion::Dataset& ds, std::size_t limit = 0);

struct TrainConfig {
  std::size_t iterations = 5000;
  std::size_t batch_size = 32;
  ad::LrSchedule schedule{6e-4, 5e-6, 4400};
  ad::AdamConfig adam;
  double tau = 1.0;
  bool anneal = false;
  double tau_start = 5.0;
  double tau_end = 0.5;
  std::size_t eval_every = 500;
  std::size_t val_limit = 0;  // 0: whole validation set
  std::uint64_t seed = 1;
};

struct MetricsRow {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  std::vector<double> val_per_frame;
  double val_average = 0.0;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  double final_val = 0.0;
};

/// Gumbel temperature at `iteration` (fixed, or exponential anneal start -> end).
double temperature(const TrainConfig& cfg, std::size_t iteration) noexcept;

/// Minimizes the mean per-joint Euclidean error of the predicted frames.
/// Deterministic for a fixed seed. Throws NumericError on a non-finite loss.
/// `optimizer` may carry state from a checkpoint; a fresh one is used when null.
TrainResult train_loop(Model& model, const motion::Dataset& train, const motion::Dataset& val,
                       const TrainConfig& cfg, ad::Adam* optimizer = nullptr,
                       const std::function<void(const MetricsRow&)>& on_row = {});

/// Mean training loss over `ds` in inference mode.
double dataset_loss(Model& model, const motion::Dataset& ds, std::size_t limit = 0);

std::string metrics_csv_header(std::size_t horizon);
std::string metrics_csv_row(const MetricsRow& row);

}  // namespace ugc::gcnext
