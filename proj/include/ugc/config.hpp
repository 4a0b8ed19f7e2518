// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ugc/gcnext.hpp"
#include "ugc/motion.hpp"

namespace ugc {

/// Everything a CLI run needs. Defaults are the toy preset.
struct RunConfig {
  gcnext::ModelConfig model;
  gcnext::TrainConfig train;
  motion::SyntheticConfig data;  // data.dims mirrors model.dims
  std::size_t train_samples = 4096;
  std::size_t val_samples = 256;
  std::uint64_t val_first = 1ULL << 20;  // validation draws synthetic indices from here on
  std::string train_data;  // MSEQ path; empty: synthetic
  std::string val_data;

  RunConfig();
  /// Cross-field checks. Throws ConfigError.
  void validate() const;
  /// Sets the run seed (model init, batching, Gumbel noise); data keeps data_seed.
  void set_seed(std::uint64_t seed);
};

/// `key = value` lines, '#' starts a comment. Unknown keys, unparsable values,
/// duplicates and violated constraints throw ConfigError carrying the line number.
RunConfig parse_config_text(std::string_view text);
/// Throws IoError when the file cannot be read.
RunConfig parse_config(const std::filesystem::path& path);
/// Every key, one per line, in a fixed order; parse_config_text(to_text(c)) == c.
std::string to_text(const RunConfig& c);

}  // namespace ugc
