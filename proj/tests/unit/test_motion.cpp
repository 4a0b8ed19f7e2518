// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "ugc/error.hpp"
#include "ugc/motion.hpp"

using namespace ugc;
using namespace ugc::motion;

namespace {

SyntheticConfig still_config() {
  SyntheticConfig c;
  c.freq_min = c.freq_max = 0.0;
  c.noise_std = 0.0;
  return c;
}

float round32(double v) { return static_cast<float>(v); }

}  // namespace

TEST_SUITE("motion-data") {
  TEST_CASE("frozen sinusoid without drift or noise is a constant pose") {
    SyntheticConfig c = still_config();
    c.drift_max = 0.0;
    const auto ds = gen_synthetic(c, 16, 0);
    for (const auto& s : ds.samples) {
      const Tensor zv = zero_velocity(s.history, c.dims.future);
      CHECK(zv.shape() == Shape{10, 7, 3});
      CHECK(mpjpe(zv, s.future) == 0.0);
    }
  }

  TEST_CASE("generation is a pure function of config and index") {
    SyntheticConfig c;
    for (Family f : {Family::Sinusoidal, Family::Ballistic, Family::Mixed}) {
      c.family = f;
      const auto a = synth_sample(c, 12345), b = synth_sample(c, 12345);
      CHECK(a.history == b.history);
      CHECK(a.future == b.future);
      const auto ds = gen_synthetic(c, 3, 12344);
      CHECK(ds.samples[1].future == a.future);
    }
    SyntheticConfig other = c;
    other.seed = 2;
    CHECK_FALSE(synth_sample(other, 5).history == synth_sample(c, 5).history);
  }

  TEST_CASE("default toy data has a positive finite zero-velocity error") {
    const SyntheticConfig c;
    CHECK(c.dims.joints == 7);
    CHECK(c.dims.history == 10);
    CHECK(c.dims.future == 10);
    const auto ds = gen_synthetic(c, 64, 0);
    double total = 0.0;
    for (const auto& s : ds.samples) total += mpjpe(zero_velocity(s.history, 10), s.future);
    CHECK(total > 0.0);
    CHECK(std::isfinite(total));
  }

  TEST_CASE("invalid synthetic ranges are config errors") {
    SyntheticConfig c;
    c.freq_min = 0.5;
    c.freq_max = 0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SyntheticConfig{};
    c.noise_std = -1;
    CHECK_THROWS_AS(gen_synthetic(c, 1), ConfigError);
    CHECK_THROWS_AS(gen_synthetic(SyntheticConfig{}, 0), ConfigError);
    CHECK_THROWS_AS(family_from_name("spiral"), ConfigError);
    CHECK(family_from_name("ballistic") == Family::Ballistic);
  }

  TEST_CASE("mpjpe examples") {
    const Tensor a = oracle::random({4, 3, 3}, 1);
    CHECK(mpjpe(a, a) == 0.0);
    CHECK(mpjpe(Tensor({1, 1, 3}, {3, 4, 0}), Tensor({1, 1, 3})) == 5.0);
    CHECK(mpjpe_per_frame(Tensor({1, 2, 3}, {0, 0, 0, 6, 8, 0}), Tensor({1, 2, 3}))[0] == 5.0);
    CHECK_THROWS_AS(mpjpe(Tensor({1, 2, 3}), Tensor({1, 3, 3})), ShapeError);
    CHECK_THROWS_AS(mpjpe(Tensor({1, 2, 2}), Tensor({1, 2, 2})), ShapeError);
  }

  TEST_CASE("mpjpe behaves like a metric and averages its per-frame values") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Tensor p = oracle::random({5, 4, 3}, s, -100, 100), g = oracle::random({5, 4, 3}, 100 + s, -100, 100);
      const double e = mpjpe(p, g);
      CHECK(e > 0.0);
      CHECK(e == mpjpe(g, p));
      const auto pf = mpjpe_per_frame(p, g);
      double mean = 0.0;
      for (double v : pf) mean += v;
      mean /= static_cast<double>(pf.size());
      CHECK(std::abs(mean - e) < 1e-12);
    }
  }

  TEST_CASE("zero velocity on linear motion errs by k times the displacement") {
    SyntheticConfig c = still_config();
    c.drift_max = 20.0;
    const auto ds = gen_synthetic(c, 16, 0);
    for (const auto& s : ds.samples) {
      // Every joint shares the root velocity; read it off the last two observed frames.
      double d2 = 0.0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double dv = s.history.at({9, 0, ch}) - s.history.at({8, 0, ch});
        d2 += dv * dv;
      }
      const double d = std::sqrt(d2);
      const auto pf = mpjpe_per_frame(zero_velocity(s.history, 10), s.future);
      for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs(pf[k] - static_cast<double>(k + 1) * d) < 1e-9);
    }
  }

  TEST_CASE("zero velocity repeats the last observed pose") {
    const Tensor h = oracle::random({4, 2, 3}, 2);
    const Tensor p = zero_velocity(h, 3);
    REQUIRE(p.shape() == Shape{3, 2, 3});
    for (std::size_t f = 0; f < 3; ++f)
      for (std::size_t k = 0; k < 6; ++k) CHECK(p[f * 6 + k] == h[18 + k]);
    CHECK_THROWS_AS(zero_velocity(Tensor({0, 2, 3}), 3), ShapeError);
  }

  TEST_CASE("MSEQ round trip at 32-bit precision") {
    SyntheticConfig c;
    c.dims = SequenceDims{3, 2, 4, 3};
    const auto ds = gen_synthetic(c, 5, 7);
    const auto bytes = encode_mseq(ds);
    CHECK(bytes.size() == 28 + 5 * 5 * 4 * 3 * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "MSEQ");
    const auto back = decode_mseq(bytes);
    REQUIRE(back.size() == 5);
    CHECK(back.dims == ds.dims);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t k = 0; k < ds.samples[i].history.size(); ++k)
        CHECK(back.samples[i].history[k] == static_cast<double>(round32(ds.samples[i].history[k])));
    CHECK(encode_mseq(back) == bytes);

    const auto dir = std::filesystem::temp_directory_path() / "ugc_unit_mseq";
    std::filesystem::create_directories(dir);
    save_mseq(ds, dir / "a.mseq");
    CHECK(encode_mseq(load_mseq(dir / "a.mseq")) == bytes);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_mseq(dir / "missing.mseq"), IoError);
  }

  TEST_CASE("MSEQ format errors carry byte offsets") {
    SyntheticConfig c;
    c.dims = SequenceDims{2, 1, 2, 3};
    auto bytes = encode_mseq(gen_synthetic(c, 2, 0));
    auto bad = bytes;
    bad[0] = 'X';
    try {
      decode_mseq(bad);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
    bad = bytes;
    bad[4] = 2;
    try {
      decode_mseq(bad);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
    bad.assign(bytes.begin(), bytes.end() - 3);
    CHECK_THROWS_AS(decode_mseq(bad), FormatError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_mseq(bad), FormatError);
  }

  TEST_CASE("empty dataset round-trips to a header-only file") {
    Dataset ds;
    const auto bytes = encode_mseq(ds);
    CHECK(bytes.size() == 28);
    const auto back = decode_mseq(bytes);
    CHECK(back.empty());
    CHECK(back.dims == ds.dims);
  }

  TEST_CASE("batches cover every index once per epoch") {
    for (std::size_t bs : {1u, 7u, 10u, 64u}) {
      const auto batches = split_batches(64, bs, 3);
      std::vector<std::size_t> all;
      for (const auto& b : batches) {
        CHECK(b.size() <= bs);
        all.insert(all.end(), b.begin(), b.end());
      }
      std::sort(all.begin(), all.end());
      REQUIRE(all.size() == 64);
      for (std::size_t i = 0; i < 64; ++i) CHECK(all[i] == i);
    }
    CHECK(split_batches(64, 64, 3).size() == 1);
  }

  TEST_CASE("batch order depends only on the seed") {
    CHECK(split_batches(50, 8, 9) == split_batches(50, 8, 9));
    CHECK(split_batches(50, 8, 9) != split_batches(50, 8, 10));
    CHECK(split_batches(50, 8, 9, 0) != split_batches(50, 8, 9, 1));
    BatchSampler s(10, 4, 5);
    std::vector<std::size_t> e0;
    for (int i = 0; i < 3; ++i) {
      const auto b = s.next();
      e0.insert(e0.end(), b.begin(), b.end());
    }
    CHECK(s.batches_per_epoch() == 3);
    CHECK(std::set<std::size_t>(e0.begin(), e0.end()).size() == 10);
    s.next();
    CHECK(s.epoch() == 1);
    CHECK_THROWS_AS(BatchSampler(10, 0, 1), ConfigError);
  }
}
