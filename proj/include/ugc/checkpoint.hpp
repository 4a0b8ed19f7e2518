// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ugc/autodiff.hpp"
#include "ugc/config.hpp"
#include "ugc/gcnext.hpp"
#include "ugc/tensor.hpp"

namespace ugc {

/// UGCK archive: "UGCK" | u32 version | u32 tensor count | per tensor: u16 name length,
/// UTF-8 name, u8 rank, u32 extents, float64 LE values | u32 config length, config text.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string config_text;

  const Tensor* find(std::string_view name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
/// Throws FormatError (with byte offset) on bad magic, version or truncation.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Model parameters plus, when given, Adam moments ("adam.m.<name>", "adam.v.<name>")
/// and the step count ("adam.step").
Checkpoint snapshot(const gcnext::Model& model, const RunConfig& cfg, const ad::Adam* opt = nullptr);

struct Restored {
  RunConfig config;
  gcnext::Model model;
  ad::Adam optimizer;
};

/// Rebuilds the model from the embedded config and copies every parameter. Missing
/// or mis-shaped tensors throw FormatError.
Restored restore(const Checkpoint& ck);

}  // namespace ugc
