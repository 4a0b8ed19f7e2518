// SPDX-License-Identifier: Apache-2.0
#include "ugc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "ugc/error.hpp"

namespace ugc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "': expected " +
                    std::string(want));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) { return static_cast<std::size_t>(to_u64(key, v)); }

std::size_t to_positive(std::string_view key, std::string_view v) {
  const auto n = to_size(key, v);
  if (n == 0) bad(key, v, "a positive integer");
  return n;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "a finite number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  bad(key, v, "true|false|on|off");
}

Kind to_kind(std::string_view key, std::string_view v) {
  auto k = kind_from_name(v);
  if (!k) bad(key, v, "one of g,st,sc,tc,s,t,c");
  return *k;
}

std::vector<Kind> to_kinds(std::string_view key, std::string_view v) {
  std::vector<Kind> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const auto item = trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (item.empty()) bad(key, v, "a comma-separated list of kinds");
    out.push_back(to_kind(key, item));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::string kinds_text(const std::vector<Kind>& ks) {
  std::string s;
  for (auto k : ks) {
    if (!s.empty()) s += ',';
    s += kind_name(k);
  }
  return s;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  using R = RunConfig;
  using V = std::string_view;
  static const std::vector<Key> table = {
      {"history", [](R& c, V k, V v) { c.model.dims.history = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.model.dims.history); }},
      {"future", [](R& c, V k, V v) { c.model.dims.future = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.model.dims.future); }},
      {"joints", [](R& c, V k, V v) { c.model.dims.joints = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.model.dims.joints); }},
      {"channels", [](R& c, V k, V v) { c.model.dims.channels = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.model.dims.channels); }},
      {"layers", [](R& c, V k, V v) { c.model.layers = to_size(k, v); },
       [](const R& c) { return std::to_string(c.model.layers); }},
      {"architecture",
       [](R& c, V k, V v) {
         auto a = gcnext::architecture_from_name(v);
         if (!a) bad(k, v, "dynamic|all-avg|all-sum|single|refine");
         c.model.architecture = *a;
       },
       [](const R& c) { return std::string(gcnext::architecture_name(c.model.architecture)); }},
      {"options", [](R& c, V k, V v) { c.model.options = to_kinds(k, v); },
       [](const R& c) { return kinds_text(c.model.options); }},
      {"base_kind", [](R& c, V k, V v) { c.model.base_kind = to_kind(k, v); },
       [](const R& c) { return std::string(kind_name(c.model.base_kind)); }},
      {"tied", [](R& c, V k, V v) { c.model.tied = to_bool(k, v); },
       [](const R& c) { return flag(c.model.tied); }},
      {"pooling",
       [](R& c, V k, V v) {
         auto p = gcnext::pooling_from_name(v);
         if (!p) bad(k, v, "pool-joints|pool-all");
         c.model.pooling = *p;
       },
       [](const R& c) { return std::string(gcnext::pooling_name(c.model.pooling)); }},
      {"hidden", [](R& c, V k, V v) { c.model.hidden = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.model.hidden); }},
      {"residual", [](R& c, V k, V v) { c.model.residual = to_bool(k, v); },
       [](const R& c) { return flag(c.model.residual); }},
      {"coord_scale",
       [](R& c, V k, V v) {
         c.model.coord_scale = to_double(k, v);
         if (!(c.model.coord_scale > 0)) bad(k, v, "a positive number");
       },
       [](const R& c) { return num(c.model.coord_scale); }},
      {"freeze_base", [](R& c, V k, V v) { c.model.freeze_base = to_bool(k, v); },
       [](const R& c) { return flag(c.model.freeze_base); }},
      {"tau",
       [](R& c, V k, V v) {
         c.train.tau = to_double(k, v);
         if (!(c.train.tau > 0)) bad(k, v, "a positive temperature");
       },
       [](const R& c) { return num(c.train.tau); }},
      {"anneal", [](R& c, V k, V v) { c.train.anneal = to_bool(k, v); },
       [](const R& c) { return flag(c.train.anneal); }},
      {"tau_start",
       [](R& c, V k, V v) {
         c.train.tau_start = to_double(k, v);
         if (!(c.train.tau_start > 0)) bad(k, v, "a positive temperature");
       },
       [](const R& c) { return num(c.train.tau_start); }},
      {"tau_end",
       [](R& c, V k, V v) {
         c.train.tau_end = to_double(k, v);
         if (!(c.train.tau_end > 0)) bad(k, v, "a positive temperature");
       },
       [](const R& c) { return num(c.train.tau_end); }},
      {"lr_start",
       [](R& c, V k, V v) {
         c.train.schedule.start = to_double(k, v);
         if (c.train.schedule.start < 0) bad(k, v, "a non-negative rate");
       },
       [](const R& c) { return num(c.train.schedule.start); }},
      {"lr_drop_to",
       [](R& c, V k, V v) {
         c.train.schedule.drop_to = to_double(k, v);
         if (c.train.schedule.drop_to < 0) bad(k, v, "a non-negative rate");
       },
       [](const R& c) { return num(c.train.schedule.drop_to); }},
      {"lr_drop_at", [](R& c, V k, V v) { c.train.schedule.drop_at = to_size(k, v); },
       [](const R& c) { return std::to_string(c.train.schedule.drop_at); }},
      {"clip",
       [](R& c, V k, V v) {
         c.train.adam.clip_norm = to_double(k, v);
         if (c.train.adam.clip_norm < 0) bad(k, v, "a non-negative norm (0 disables)");
       },
       [](const R& c) { return num(c.train.adam.clip_norm); }},
      {"batch", [](R& c, V k, V v) { c.train.batch_size = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.train.batch_size); }},
      {"iterations", [](R& c, V k, V v) { c.train.iterations = to_size(k, v); },
       [](const R& c) { return std::to_string(c.train.iterations); }},
      {"eval_every", [](R& c, V k, V v) { c.train.eval_every = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.train.eval_every); }},
      {"val_limit", [](R& c, V k, V v) { c.train.val_limit = to_size(k, v); },
       [](const R& c) { return std::to_string(c.train.val_limit); }},
      {"seed", [](R& c, V k, V v) { c.set_seed(to_u64(k, v)); },
       [](const R& c) { return std::to_string(c.train.seed); }},
      {"family", [](R& c, V, V v) { c.data.family = motion::family_from_name(v); },
       [](const R& c) { return std::string(motion::family_name(c.data.family)); }},
      {"freq_min", [](R& c, V k, V v) { c.data.freq_min = to_double(k, v); },
       [](const R& c) { return num(c.data.freq_min); }},
      {"freq_max", [](R& c, V k, V v) { c.data.freq_max = to_double(k, v); },
       [](const R& c) { return num(c.data.freq_max); }},
      {"amp_min", [](R& c, V k, V v) { c.data.amp_min = to_double(k, v); },
       [](const R& c) { return num(c.data.amp_min); }},
      {"amp_max", [](R& c, V k, V v) { c.data.amp_max = to_double(k, v); },
       [](const R& c) { return num(c.data.amp_max); }},
      {"drift_max", [](R& c, V k, V v) { c.data.drift_max = to_double(k, v); },
       [](const R& c) { return num(c.data.drift_max); }},
      {"offset_max", [](R& c, V k, V v) { c.data.offset_max = to_double(k, v); },
       [](const R& c) { return num(c.data.offset_max); }},
      {"noise_std", [](R& c, V k, V v) { c.data.noise_std = to_double(k, v); },
       [](const R& c) { return num(c.data.noise_std); }},
      {"data_seed", [](R& c, V k, V v) { c.data.seed = to_u64(k, v); },
       [](const R& c) { return std::to_string(c.data.seed); }},
      {"train_samples", [](R& c, V k, V v) { c.train_samples = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.train_samples); }},
      {"val_samples", [](R& c, V k, V v) { c.val_samples = to_positive(k, v); },
       [](const R& c) { return std::to_string(c.val_samples); }},
      {"val_first", [](R& c, V k, V v) { c.val_first = to_u64(k, v); },
       [](const R& c) { return std::to_string(c.val_first); }},
      {"train_data", [](R& c, V, V v) { c.train_data = std::string(v); },
       [](const R& c) { return c.train_data; }},
      {"val_data", [](R& c, V, V v) { c.val_data = std::string(v); }, [](const R& c) { return c.val_data; }},
  };
  return table;
}

}  // namespace

RunConfig::RunConfig() { data.dims = model.dims; }

void RunConfig::set_seed(std::uint64_t seed) { train.seed = seed; }

void RunConfig::validate() const {
  model.validate();
  data.validate();
  if (!(data.dims == model.dims)) throw ConfigError("data dims differ from model dims");
  if (model.dims.channels != 3) throw ConfigError("channels must be 3 (MPJPE is a 3D distance)");
  if (model.architecture == gcnext::Architecture::Refine && model.base_kind == Kind::General) {
    throw ConfigError("a refinement base must be a masked kind");
  }
  if (train.anneal && !(train.tau_start > 0 && train.tau_end > 0)) {
    throw ConfigError("annealed temperatures must be positive");
  }
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig c;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
    if (it == table.end()) throw ConfigError("unknown key '" + std::string(key) + "'", line_no);
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("duplicate key '" + std::string(key) + "'", line_no);
    }
    try {
      it->set(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), line_no);
    }
  }
  c.data.dims = c.model.dims;
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string to_text(const RunConfig& c) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(c) + "\n";
  return out;
}

}  // namespace ugc
