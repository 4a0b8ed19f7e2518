// SPDX-License-Identifier: Apache-2.0
// ugc: data generation, training, refinement, evaluation, cost reports, self-checks.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ugc/bench.hpp"
#include "ugc/checkpoint.hpp"
#include "ugc/config.hpp"
#include "ugc/error.hpp"
#include "ugc/gcnext.hpp"
#include "ugc/motion.hpp"
#include "ugc/verify.hpp"

namespace fs = std::filesystem;
using namespace ugc;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string ckpt;
  std::string base;
  std::string out;
  std::string data;
  std::string baseline;
  std::string split = "train";
  std::optional<std::size_t> iterations;
  bool quiet = false;
};

RunConfig load_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : parse_config(o.config);
  if (o.seed) c.set_seed(*o.seed);
  if (o.iterations) c.train.iterations = *o.iterations;
  return c;
}

motion::Dataset dataset(const RunConfig& c, bool val) {
  const std::string& path = val ? c.val_data : c.train_data;
  motion::Dataset ds = path.empty()
                           ? motion::gen_synthetic(c.data, val ? c.val_samples : c.train_samples, val ? c.val_first : 0)
                           : motion::load_mseq(path);
  if (!(ds.dims == c.model.dims)) throw ConfigError("dataset '" + path + "' dims do not match the model config");
  return ds;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  f << text;
  if (!f) throw IoError("failed writing '" + p.string() + "'");
}

fs::path output_dir(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out is required");
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  return dir;
}

std::string policy_table(const gcnext::Model& m, const std::vector<std::vector<double>>& policy) {
  std::string out = "layer";
  char buf[64];
  std::size_t width = 0;
  for (const auto& l : m.layers) width = std::max(width, l.candidates.size());
  for (std::size_t i = 0; i < width; ++i) {
    std::snprintf(buf, sizeof buf, " %8s", ("gc" + std::to_string(i + 1)).c_str());
    out += buf;
  }
  out += "   kinds\n";
  for (std::size_t l = 0; l < policy.size(); ++l) {
    std::snprintf(buf, sizeof buf, "%5zu", l);
    out += buf;
    for (double p : policy[l]) {
      std::snprintf(buf, sizeof buf, " %8.4f", p);
      out += buf;
    }
    out += "   ";
    for (std::size_t i = 0; i < m.layers[l].candidates.size(); ++i) {
      if (i) out += ",";
      const auto& b = m.layers[l].candidates[i];
      out += (b.null_branch ? "0:" : "") + b.spec.label();
    }
    out += "\n";
  }
  return out;
}

void print_eval(const std::string& title, const gcnext::EvalResult& r) {
  std::printf("%s\n", title.c_str());
  for (std::size_t f = 0; f < r.per_frame.size(); ++f) std::printf("  frame %2zu: %10.4f mm\n", f + 1, r.per_frame[f]);
  std::printf("  average : %10.4f mm\n", r.average);
}

int train_and_save(gcnext::Model& model, const RunConfig& cfg, const fs::path& dir, bool quiet) {
  const auto train = dataset(cfg, false);
  const auto val = dataset(cfg, true);
  ad::Adam opt(cfg.train.adam, cfg.train.schedule);
  std::ofstream csv(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
  if (!csv) throw IoError("cannot open '" + (dir / "metrics.csv").string() + "' for writing");
  csv << gcnext::metrics_csv_header(cfg.model.dims.future) << "\n";
  gcnext::train_loop(model, train, val, cfg.train, &opt, [&](const gcnext::MetricsRow& row) {
    csv << gcnext::metrics_csv_row(row) << "\n";
    csv.flush();
    if (!quiet) std::printf("iter %6zu  train %.4f  val %.4f mm\n", row.iteration, row.train_loss, row.val_average);
  });
  if (!csv) throw IoError("failed writing metrics CSV");
  save_checkpoint(snapshot(model, cfg, &opt), dir / "model.ugck");
  if (!quiet) std::printf("wrote %s and %s\n", (dir / "model.ugck").c_str(), (dir / "metrics.csv").c_str());
  return kOk;
}

int cmd_gen_data(const Options& o) {
  RunConfig cfg = load_config(o);
  if (o.out.empty()) throw ConfigError("--out is required");
  const bool val = o.split == "val";
  if (!val && o.split != "train") throw ConfigError("--split must be train or val");
  cfg.train_data.clear();
  cfg.val_data.clear();
  const auto ds = dataset(cfg, val);
  motion::save_mseq(ds, o.out);
  if (!o.quiet) std::printf("wrote %zu samples to %s\n", ds.size(), o.out.c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  RunConfig cfg = load_config(o);
  if (cfg.model.architecture == gcnext::Architecture::Refine) {
    throw ConfigError("architecture = refine needs `ugc refine --base`");
  }
  const fs::path dir = output_dir(o);
  gcnext::Model model = gcnext::build_model(cfg.model, cfg.train.seed);
  return train_and_save(model, cfg, dir, o.quiet);
}

int cmd_refine(const Options& o) {
  if (o.base.empty()) throw ConfigError("--base is required");
  RunConfig cfg = load_config(o);
  const Restored base = restore(load_checkpoint(o.base));
  if (base.model.config.architecture != gcnext::Architecture::Single) {
    throw ConfigError("the base checkpoint must hold a single-kind model");
  }
  const fs::path dir = output_dir(o);
  gcnext::Model model = gcnext::build_refine(base.model, cfg.model.options, cfg.train.seed, cfg.model.freeze_base);
  cfg.model = model.config;
  cfg.data.dims = cfg.model.dims;
  if (cfg.train.iterations == 0) {
    save_checkpoint(snapshot(model, cfg), dir / "model.ugck");
    if (!o.quiet) std::printf("wrote %s (no training steps)\n", (dir / "model.ugck").c_str());
    return kOk;
  }
  return train_and_save(model, cfg, dir, o.quiet);
}

int cmd_eval(const Options& o) {
  if (o.baseline == "zero-velocity") {
    RunConfig cfg = load_config(o);
    const auto ds = o.data.empty() ? dataset(cfg, true) : motion::load_mseq(o.data);
    print_eval("zero-velocity baseline (" + std::to_string(ds.size()) + " samples)",
               gcnext::evaluate_zero_velocity(ds));
    return kOk;
  }
  if (!o.baseline.empty()) throw ConfigError("unknown baseline '" + o.baseline + "'");
  if (o.ckpt.empty()) throw ConfigError("--ckpt or --baseline zero-velocity is required");
  Restored r = restore(load_checkpoint(o.ckpt));
  RunConfig cfg = r.config;
  if (!o.config.empty()) {
    RunConfig over = load_config(o);
    cfg.data = over.data;
    cfg.val_samples = over.val_samples;
    cfg.val_first = over.val_first;
    cfg.val_data = over.val_data;
    cfg.data.dims = cfg.model.dims;
  }
  const auto ds = o.data.empty() ? dataset(cfg, true) : motion::load_mseq(o.data);
  if (!(ds.dims == cfg.model.dims)) throw ConfigError("dataset dims do not match the checkpoint");
  const auto res = gcnext::evaluate(r.model, ds);
  print_eval(std::string(gcnext::architecture_name(r.model.config.architecture)) + " model (" +
                 std::to_string(ds.size()) + " samples)",
             res);
  std::printf("selection frequency per layer\n%s", policy_table(r.model, res.policy).c_str());
  return kOk;
}

int cmd_bench(const Options& o) {
  gcnext::Model model;
  if (!o.ckpt.empty()) {
    model = restore(load_checkpoint(o.ckpt)).model;
  } else {
    RunConfig cfg = load_config(o);
    if (cfg.model.architecture == gcnext::Architecture::Refine) {
      gcnext::ModelConfig base = cfg.model;
      base.architecture = gcnext::Architecture::Single;
      model = gcnext::build_refine(gcnext::build_skeleton(base), cfg.model.options, 0, cfg.model.freeze_base);
    } else {
      model = gcnext::build_skeleton(cfg.model);
    }
  }
  const auto report = bench::cost_model(model);
  if (o.out.empty()) {
    std::printf("%s", bench::format_text(report).c_str());
  } else {
    std::printf("%s", bench::emit_report(report, o.out).c_str());
  }
  return kOk;
}

int cmd_verify(const Options& o) {
  const auto results = verify::run_all();
  return verify::print_results(results, std::cout, !o.quiet) ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UniGC operators and the GCNext dynamic network"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", o.config, "key = value run config");
    c->add_option("--seed", o.seed, "override the run seed");
    c->add_flag("--quiet", o.quiet, "less output");
  };

  auto* gen = app.add_subcommand("gen-data", "write a synthetic MSEQ dataset");
  common(gen);
  gen->add_option("--out", o.out, "output .mseq path")->required();
  gen->add_option("--split", o.split, "train | val");

  auto* train = app.add_subcommand("train", "train a model from scratch");
  common(train);
  train->add_option("--out", o.out, "output directory (model.ugck, metrics.csv)")->required();
  train->add_option("--iterations", o.iterations, "override the iteration count");

  auto* refine = app.add_subcommand("refine", "add zero-initialized dynamic branches to a base model and train");
  common(refine);
  refine->add_option("--base", o.base, "single-kind base checkpoint")->required();
  refine->add_option("--out", o.out, "output directory")->required();
  refine->add_option("--iterations", o.iterations, "override the iteration count (0: build only)");

  auto* eval = app.add_subcommand("eval", "per-frame and average MPJPE plus selection frequencies");
  common(eval);
  eval->add_option("--ckpt", o.ckpt, "checkpoint");
  eval->add_option("--data", o.data, "MSEQ dataset (default: the validation set of the config)");
  eval->add_option("--baseline", o.baseline, "zero-velocity");

  auto* bench = app.add_subcommand("bench", "analytic parameter and FLOP report");
  common(bench);
  bench->add_option("--ckpt", o.ckpt, "checkpoint (default: model described by --config)");
  bench->add_option("--out", o.out, "CSV path; the text table goes next to it");

  auto* ver = app.add_subcommand("verify", "run the oracle suites");
  ver->add_flag("--quiet", o.quiet, "one line per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o);
    if (*refine) return cmd_refine(o);
    if (*eval) return cmd_eval(o);
    if (*bench) return cmd_bench(o);
    if (*ver) return cmd_verify(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIoError;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error at byte %zu: %s\n", e.offset(), e.what());
    return kIoError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kVerifyFailed;
  }
  return kOk;
}
