// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ugc/tensor.hpp"

namespace ugc::motion {

/// One training example in millimeters: history (T_h,J,C) and future (T_f,J,C).
struct MotionSample {
  Tensor history;
  Tensor future;
};

struct SequenceDims {
  std::size_t history = 10;
  std::size_t future = 10;
  std::size_t joints = 7;
  std::size_t channels = 3;

  std::size_t frames() const noexcept { return history + future; }
  bool operator==(const SequenceDims&) const = default;
};

struct Dataset {
  SequenceDims dims;
  std::vector<MotionSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
};

enum class Family { Sinusoidal, Ballistic, Mixed };

std::string_view family_name(Family f) noexcept;
/// Throws ConfigError on unknown names.
Family family_from_name(std::string_view name);

struct SyntheticConfig {
  Family family = Family::Sinusoidal;
  SequenceDims dims;
  double freq_min = 0.02;  // cycles per frame
  double freq_max = 0.08;
  double amp_min = 50.0;  // mm
  double amp_max = 300.0;
  double drift_max = 5.0;    // mm per frame, per channel, uniform in [-drift_max, drift_max]
  double offset_max = 400.0;  // rest-pose joint offsets from the root, mm
  double noise_std = 1.0;    // mm
  std::uint64_t seed = 1;

  /// Throws ConfigError on inverted or negative ranges.
  void validate() const;
};

/// Sample `index` of the synthetic stream; a pure function of (cfg, index).
MotionSample synth_sample(const SyntheticConfig& cfg, std::uint64_t index);
/// Samples [first, first + n).
Dataset gen_synthetic(const SyntheticConfig& cfg, std::size_t n, std::uint64_t first = 0);

/// Per-frame mean over joints of the Euclidean joint error. Requires C == 3.
std::vector<double> mpjpe_per_frame(const Tensor& pred, const Tensor& gt);
/// Mean of mpjpe_per_frame.
double mpjpe(const Tensor& pred, const Tensor& gt);

/// Every predicted frame equals the last observed pose.
Tensor zero_velocity(const Tensor& history, std::size_t horizon);

/// MSEQ: "MSEQ" | u32 version=1 | u32 count | u32 T_h | u32 T_f | u32 J | u32 C |
/// per sample (T_h+T_f)*J*C little-endian float32, frame-major, then joint, then channel.
std::vector<std::uint8_t> encode_mseq(const Dataset& ds);
Dataset decode_mseq(std::span<const std::uint8_t> bytes);
void save_mseq(const Dataset& ds, const std::filesystem::path& path);
Dataset load_mseq(const std::filesystem::path& path);

/// Deterministic shuffled epochs: every index appears exactly once per epoch,
/// the last batch of an epoch may be short.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batches_per_epoch() const noexcept;

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

/// All batches of one epoch (convenience over BatchSampler).
std::vector<std::vector<std::size_t>> split_batches(std::size_t dataset_size, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch = 0);

}  // namespace ugc::motion
