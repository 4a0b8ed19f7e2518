// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "ugc/checkpoint.hpp"
#include "ugc/config.hpp"
#include "ugc/error.hpp"
#include "ugc/verify.hpp"

using namespace ugc;
namespace fs = std::filesystem;

namespace {

const char* kSmall =
    "# small run for tests\n"
    "history = 3\nfuture = 2\njoints = 3\n"
    "layers = 2\nhidden = 8\n"
    "iterations = 6\nbatch = 4\neval_every = 3\n"
    "train_samples = 32\nval_samples = 8\n";

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream f(dir / name, std::ios::binary);
    f << text;
    return dir / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Runs the CLI with stdout and stderr captured into `out`; returns the exit code.
int run(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(UGC_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string mm_lines(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string l; std::getline(in, l);)
    if (l.find(" mm") != std::string::npos) out += l + "\n";
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("empty config gives the toy preset") {
    const RunConfig c = parse_config_text("");
    const RunConfig d;
    CHECK(to_text(c) == to_text(d));
    CHECK(c.model.dims.joints == 7);
    CHECK(c.model.dims.history == 10);
    CHECK(c.model.dims.future == 10);
    CHECK(c.model.layers == 8);
    CHECK(c.model.options.size() == 4);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train.iterations == 5000);
    CHECK(c.train.schedule.start == 6e-4);
    CHECK(c.train.schedule.drop_to == 5e-6);
    CHECK(c.train.schedule.drop_at == 4400);
  }

  TEST_CASE("config keys") {
    CHECK(parse_config_text("layers = 48\n").model.layers == 48);
    CHECK(parse_config_text("options = st,sc,s,c").model.options ==
          std::vector<Kind>{Kind::ST, Kind::SC, Kind::S, Kind::C});
    const RunConfig c = parse_config_text("  # comment\nresidual = off  # trailing\ntau = 0.5\npooling = pool-all\n");
    CHECK_FALSE(c.model.residual);
    CHECK(c.train.tau == 0.5);
    CHECK(c.model.pooling == gcnext::Pooling::All);
    const RunConfig back = parse_config_text(to_text(c));
    CHECK(to_text(back) == to_text(c));
  }

  TEST_CASE("config errors name the line") {
    try {
      parse_config_text("layers = 4\n\nwidth = 3\n");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("width") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("layers = many"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("options = st,xx"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("options ="), ConfigError);
    CHECK_THROWS_AS(parse_config_text("layers = 2\nlayers = 3"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("no equals sign"), ConfigError);
    CHECK_THROWS_AS(parse_config(fs::path("/nonexistent/ugc.cfg")), IoError);
  }

  TEST_CASE("checkpoint round trip is bit-exact, optimizer moments included") {
    RunConfig cfg = parse_config_text(kSmall);
    auto model = gcnext::build_model(cfg.model, 3);
    motion::SyntheticConfig sc = cfg.data;
    const auto data = motion::gen_synthetic(sc, 16, 0);
    ad::Adam opt(cfg.train.adam, cfg.train.schedule);
    gcnext::TrainConfig tc = cfg.train;
    tc.iterations = 3;
    tc.val_limit = 2;
    gcnext::train_loop(model, data, data, tc, &opt);

    const auto bytes = encode_checkpoint(snapshot(model, cfg, &opt));
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "UGCK");
    Restored r = restore(decode_checkpoint(bytes));
    auto a = model.parameters();
    auto b = r.model.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i]->name == b[i]->name);
      CHECK(a[i]->value == b[i]->value);
      CHECK(a[i]->trainable == b[i]->trainable);
    }
    CHECK(r.optimizer.steps_taken() == opt.steps_taken());
    REQUIRE(r.optimizer.state().size() == opt.state().size());
    for (const auto& [name, mom] : opt.state()) {
      CHECK(r.optimizer.state().at(name).m == mom.m);
      CHECK(r.optimizer.state().at(name).v == mom.v);
    }
    CHECK(to_text(r.config) == to_text(cfg));
    CHECK(encode_checkpoint(snapshot(r.model, r.config, &r.optimizer)) == bytes);
  }

  TEST_CASE("checkpoint format errors") {
    RunConfig cfg = parse_config_text(kSmall);
    const auto bytes = encode_checkpoint(snapshot(gcnext::build_model(cfg.model, 1), cfg));
    auto bad = bytes;
    bad[1] = 'X';
    try {
      decode_checkpoint(bad);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
    bad = bytes;
    bad[4] = 9;
    try {
      decode_checkpoint(bad);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
    bad.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    Checkpoint ck = decode_checkpoint(bytes);
    ck.tensors.pop_back();
    CHECK_THROWS_AS(restore(ck), FormatError);
  }

  TEST_CASE("a sign-flipped time-space rule makes the mask algebra suite fail") {
    CHECK(verify::mask_algebra(verify::default_mask, 24).passed);
    auto flipped = [](const GraphConvSpec& spec) {
      Tensor m = verify::default_mask(spec);
      if (spec.kind() == Kind::ST) {
        for (auto& v : m.data()) v = 1.0 - v;
      }
      return m;
    };
    const auto r = verify::mask_algebra(flipped, 24);
    CHECK_FALSE(r.passed);
    CHECK_FALSE(r.failure.empty());
  }

  TEST_CASE("tying suite reports every tieable kind") {
    const auto r = verify::tying();
    CHECK(r.passed);
    std::string all;
    for (const auto& l : r.report) all += l + "\n";
    for (Kind k : kAllKinds) {
      if (k != Kind::General) CHECK(all.find(std::string(kind_name(k)) + ": params tied") != std::string::npos);
    }
  }

  TEST_CASE("command line: exit codes") {
    Scratch s("ugc_unit_cli_codes");
    const auto log = s.dir / "log.txt";
    CHECK(run("verify --quiet", log) == 0);
    CHECK(run("eval --baseline zero-velocity --config " + s.write("bad.cfg", "widht = 3\n").string(), log) == 2);
    CHECK(slurp(log).find("widht") != std::string::npos);
    CHECK(run("eval --baseline zero-velocity --config /nonexistent/x.cfg", log) == 3);
    CHECK(run("eval --ckpt " + s.write("junk.ugck", "nonsense").string(), log) == 3);
    CHECK(run("frobnicate", log) == 2);
  }

  TEST_CASE("command line: baseline, train, refine and eval") {
    Scratch s("ugc_unit_cli_flow");
    const auto log = s.dir / "log.txt";
    const auto cfg = s.write("small.cfg", kSmall);
    const auto base_cfg = s.write("base.cfg", std::string(kSmall) + "architecture = single\n");

    REQUIRE(run("eval --baseline zero-velocity --config " + cfg.string(), log) == 0);
    CHECK(slurp(log).find("average") != std::string::npos);

    REQUIRE(run("gen-data --config " + cfg.string() + " --split val --out " + (s.dir / "val.mseq").string(), log) ==
            0);
    CHECK(motion::load_mseq(s.dir / "val.mseq").size() == 8);

    REQUIRE(run("train --quiet --config " + cfg.string() + " --out " + (s.dir / "a").string(), log) == 0);
    REQUIRE(run("train --quiet --config " + cfg.string() + " --out " + (s.dir / "b").string(), log) == 0);
    const std::string m1 = slurp(s.dir / "a" / "metrics.csv");
    CHECK(m1 == slurp(s.dir / "b" / "metrics.csv"));
    CHECK(m1.rfind("iteration,train_loss,val_mpjpe_avg,val_mpjpe_f1,val_mpjpe_f2\n", 0) == 0);

    REQUIRE(run("train --quiet --config " + base_cfg.string() + " --out " + (s.dir / "base").string(), log) == 0);
    REQUIRE(run("refine --quiet --iterations 0 --config " + cfg.string() + " --base " +
                    (s.dir / "base" / "model.ugck").string() + " --out " + (s.dir / "ref").string(),
                log) == 0);
    REQUIRE(run("eval --ckpt " + (s.dir / "base" / "model.ugck").string() + " --data " +
                    (s.dir / "val.mseq").string(),
                log) == 0);
    const std::string base_eval = mm_lines(slurp(log));
    REQUIRE(run("eval --ckpt " + (s.dir / "ref" / "model.ugck").string() + " --data " +
                    (s.dir / "val.mseq").string(),
                log) == 0);
    const std::string ref_out = slurp(log);
    CHECK(mm_lines(ref_out) == base_eval);
    CHECK(ref_out.find("selection frequency") != std::string::npos);

    REQUIRE(run("bench --ckpt " + (s.dir / "a" / "model.ugck").string() + " --out " +
                    (s.dir / "cost.csv").string(),
                log) == 0);
    CHECK(fs::exists(s.dir / "cost.txt"));
    CHECK(slurp(s.dir / "cost.csv").rfind("layer,kind_options,params,train_flops,infer_flops\n", 0) == 0);
  }
}
