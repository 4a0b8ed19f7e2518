// SPDX-License-Identifier: Apache-2.0
#include "ugc/motion.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "ugc/random.hpp"

namespace ugc::motion {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kGravity = 15.7;  // mm / frame^2 at 25 fps
constexpr std::uint32_t kMseqVersion = 1;
constexpr std::size_t kMseqHeader = 4 + 6 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw Error(std::string("MSEQ: ") + what + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::Sinusoidal: return "sinusoidal";
    case Family::Ballistic: return "ballistic";
    case Family::Mixed: return "mixed";
  }
  return "?";
}

Family family_from_name(std::string_view name) {
  if (name == "sinusoidal") return Family::Sinusoidal;
  if (name == "ballistic") return Family::Ballistic;
  if (name == "mixed") return Family::Mixed;
  throw ConfigError("unknown synthetic family '" + std::string(name) + "'");
}

void SyntheticConfig::validate() const {
  if (dims.joints == 0 || dims.channels == 0 || dims.history == 0 || dims.future == 0) {
    throw ConfigError("synthetic dims must be positive");
  }
  if (freq_min < 0 || freq_max < freq_min) throw ConfigError("invalid frequency range");
  if (amp_min < 0 || amp_max < amp_min) throw ConfigError("invalid amplitude range");
  if (drift_max < 0 || offset_max < 0) throw ConfigError("drift and offset ranges must be non-negative");
  if (!(noise_std >= 0)) throw ConfigError("noise std must be non-negative");
}

MotionSample synth_sample(const SyntheticConfig& cfg, std::uint64_t index) {
  const auto& d = cfg.dims;
  Rng rng(derive_seed(cfg.seed, index, 0x6d736571));  // "mseq"
  bool ballistic = cfg.family == Family::Ballistic;
  if (cfg.family == Family::Mixed) ballistic = uniform_open(rng) < 0.5;

  const std::size_t J = d.joints, C = d.channels, T = d.frames();
  std::vector<double> root(C), vel(C), chan_phase(C);
  for (std::size_t c = 0; c < C; ++c) {
    root[c] = uniform(rng, -500.0, 500.0);
    vel[c] = uniform(rng, -cfg.drift_max, cfg.drift_max);
    chan_phase[c] = uniform(rng, 0.0, kTwoPi);
  }
  const double freq = uniform(rng, cfg.freq_min, cfg.freq_max);
  const double phase0 = uniform(rng, 0.0, kTwoPi);
  const double phase_step = uniform(rng, 0.0, 1.0);  // phase lag between neighbouring joints
  std::vector<double> offset(J * C), amp(J * C);
  for (std::size_t k = 0; k < J * C; ++k) {
    offset[k] = uniform(rng, -cfg.offset_max, cfg.offset_max);
    amp[k] = uniform(rng, cfg.amp_min, cfg.amp_max);
  }
  double launch = 0.0;
  if (ballistic) launch = uniform(rng, 0.5, 1.0) * kGravity * static_cast<double>(T) / 2.0;

  Tensor seq({T, J, C});
  for (std::size_t t = 0; t < T; ++t) {
    const double tt = static_cast<double>(t);
    for (std::size_t j = 0; j < J; ++j) {
      const double phase = kTwoPi * freq * tt + phase0 + phase_step * static_cast<double>(j);
      for (std::size_t c = 0; c < C; ++c) {
        double p = root[c] + vel[c] * tt + offset[j * C + c];
        double a = amp[j * C + c];
        if (ballistic) {
          a *= 0.2;
          if (c == 1 % C) p += launch * tt - 0.5 * kGravity * tt * tt;
        }
        p += a * std::sin(phase + chan_phase[c]);
        if (cfg.noise_std > 0) p += cfg.noise_std * normal(rng);
        seq[(t * J + j) * C + c] = p;
      }
    }
  }
  const std::size_t split = d.history * J * C;
  std::vector<double> hist(seq.data().begin(), seq.data().begin() + static_cast<std::ptrdiff_t>(split));
  std::vector<double> fut(seq.data().begin() + static_cast<std::ptrdiff_t>(split), seq.data().end());
  return MotionSample{Tensor({d.history, J, C}, std::move(hist)), Tensor({d.future, J, C}, std::move(fut))};
}

Dataset gen_synthetic(const SyntheticConfig& cfg, std::size_t n, std::uint64_t first) {
  cfg.validate();
  if (n == 0) throw ConfigError("gen_synthetic: sample count must be at least 1");
  Dataset ds{cfg.dims, {}};
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(synth_sample(cfg, first + i));
  return ds;
}

std::vector<double> mpjpe_per_frame(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ShapeError("mpjpe: shape mismatch " + shape_to_string(pred.shape()) + " vs " +
                     shape_to_string(gt.shape()));
  }
  if (pred.rank() != 3 || pred.shape()[2] != 3) {
    throw ShapeError("mpjpe: expected (frames, joints, 3), got " + shape_to_string(pred.shape()));
  }
  const std::size_t F = pred.shape()[0], J = pred.shape()[1];
  std::vector<double> out(F, 0.0);
  for (std::size_t f = 0; f < F; ++f) {
    double s = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t o = (f * J + j) * 3;
      const double dx = pred[o] - gt[o], dy = pred[o + 1] - gt[o + 1], dz = pred[o + 2] - gt[o + 2];
      s += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    out[f] = s / static_cast<double>(J);
  }
  return out;
}

double mpjpe(const Tensor& pred, const Tensor& gt) {
  const auto per = mpjpe_per_frame(pred, gt);
  if (per.empty()) return 0.0;
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

Tensor zero_velocity(const Tensor& history, std::size_t horizon) {
  if (history.rank() != 3 || history.shape()[0] == 0) {
    throw ShapeError("zero_velocity: history must be (T_h >= 1, J, C)");
  }
  const std::size_t pose = history.shape()[1] * history.shape()[2];
  const std::size_t last = (history.shape()[0] - 1) * pose;
  Tensor out({horizon, history.shape()[1], history.shape()[2]});
  for (std::size_t f = 0; f < horizon; ++f)
    for (std::size_t k = 0; k < pose; ++k) out[f * pose + k] = history[last + k];
  return out;
}

std::vector<std::uint8_t> encode_mseq(const Dataset& ds) {
  const auto& d = ds.dims;
  std::vector<std::uint8_t> out;
  out.reserve(kMseqHeader + ds.size() * d.frames() * d.joints * d.channels * 4);
  for (char c : {'M', 'S', 'E', 'Q'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kMseqVersion);
  put_u32(out, checked_u32(ds.size(), "sample count"));
  put_u32(out, checked_u32(d.history, "T_h"));
  put_u32(out, checked_u32(d.future, "T_f"));
  put_u32(out, checked_u32(d.joints, "J"));
  put_u32(out, checked_u32(d.channels, "C"));
  const Shape hs{d.history, d.joints, d.channels}, fs{d.future, d.joints, d.channels};
  for (const auto& s : ds.samples) {
    if (s.history.shape() != hs || s.future.shape() != fs) {
      throw ShapeError("encode_mseq: sample shape does not match dataset dims");
    }
    for (double v : s.history.data()) put_f32(out, static_cast<float>(v));
    for (double v : s.future.data()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

Dataset decode_mseq(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "MSEQ", 4) != 0) throw FormatError("MSEQ: bad magic", 0);
  if (in.size() < kMseqHeader) throw FormatError("MSEQ: truncated header", in.size());
  const std::uint32_t version = get_u32(in, 4);
  if (version != kMseqVersion) {
    throw FormatError("MSEQ: unsupported version " + std::to_string(version), 4);
  }
  Dataset ds;
  const std::size_t count = get_u32(in, 8);
  ds.dims = SequenceDims{get_u32(in, 12), get_u32(in, 16), get_u32(in, 20), get_u32(in, 24)};
  const auto& d = ds.dims;
  const std::size_t hist_n = d.history * d.joints * d.channels;
  const std::size_t fut_n = d.future * d.joints * d.channels;
  const std::size_t per = (hist_n + fut_n) * 4;
  std::size_t off = kMseqHeader;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (in.size() - off < per) throw FormatError("MSEQ: truncated sample " + std::to_string(i), in.size());
    auto read = [&](std::size_t n, Shape shape) {
      std::vector<double> v(n);
      for (std::size_t k = 0; k < n; ++k, off += 4) v[k] = std::bit_cast<float>(get_u32(in, off));
      return Tensor(std::move(shape), std::move(v));
    };
    Tensor h = read(hist_n, {d.history, d.joints, d.channels});
    Tensor f = read(fut_n, {d.future, d.joints, d.channels});
    ds.samples.push_back({std::move(h), std::move(f)});
  }
  if (off != in.size()) throw FormatError("MSEQ: trailing bytes after last sample", off);
  return ds;
}

void save_mseq(const Dataset& ds, const std::filesystem::path& path) {
  const auto bytes = encode_mseq(ds);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Dataset load_mseq(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_mseq(bytes);
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : n_(dataset_size), batch_(batch_size), seed_(seed), order_(dataset_size) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (dataset_size == 0) throw ConfigError("cannot batch an empty dataset");
  reshuffle();
}

std::size_t BatchSampler::batches_per_epoch() const noexcept { return (n_ + batch_ - 1) / batch_; }

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, epoch_, 0x6261746368));  // "batch"
  for (std::size_t i = n_; i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order_[i], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (cursor_ >= n_) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t end = std::min(n_, cursor_ + batch_);
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return out;
}

std::vector<std::vector<std::size_t>> split_batches(std::size_t dataset_size, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  BatchSampler s(dataset_size, batch_size, seed);
  for (std::size_t e = 0; e < epoch; ++e)
    for (std::size_t b = 0; b < s.batches_per_epoch(); ++b) s.next();
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < s.batches_per_epoch(); ++b) out.push_back(s.next());
  return out;
}

}  // namespace ugc::motion
