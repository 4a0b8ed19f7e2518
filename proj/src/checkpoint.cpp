// SPDX-License-Identifier: Apache-2.0
#include "ugc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ugc/error.hpp"

namespace ugc {

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in_[off_ + i]) << (8 * i));
    off_ += sizeof(T);
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + off_), n);
    off_ += n;
    return s;
  }

  std::size_t offset() const noexcept { return off_; }
  std::size_t remaining() const noexcept { return in_.size() - off_; }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - off_ < n) throw FormatError(std::string("UGCK: truncated ") + what, in_.size());
  }

  std::span<const std::uint8_t> in_;
  std::size_t off_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::uint8_t> out;
  for (char c : {'U', 'G', 'C', 'K'}) out.push_back(static_cast<std::uint8_t>(c));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    if (name.size() > 0xffff) throw Error("UGCK: tensor name too long");
    if (t.rank() > 0xff) throw Error("UGCK: tensor rank too large");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto e : t.shape()) {
      if (e > 0xffffffffULL) throw Error("UGCK: extent does not fit in u32");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    }
    for (double v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.config_text.size()));
  out.insert(out.end(), ck.config_text.begin(), ck.config_text.end());
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> in) {
  if (in.size() < 4 || std::memcmp(in.data(), "UGCK", 4) != 0) throw FormatError("UGCK: bad magic", 0);
  Reader r(in.subspan(0));
  r.text(4, "magic");
  const auto version = r.get<std::uint32_t>("header");
  if (version != kVersion) throw FormatError("UGCK: unsupported version " + std::to_string(version), 4);
  const auto count = r.get<std::uint32_t>("header");
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("tensor name");
    std::string name = r.text(len, "tensor name");
    const auto rank = r.get<std::uint8_t>("tensor rank");
    Shape shape(rank);
    for (auto& e : shape) e = r.get<std::uint32_t>("tensor extents");
    const std::size_t n = shape_product(shape);
    if (r.remaining() / 8 < n) throw FormatError("UGCK: truncated values of '" + name + "'", in.size());
    std::vector<double> v(n);
    for (auto& x : v) x = std::bit_cast<double>(r.get<std::uint64_t>("tensor values"));
    ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(v)));
  }
  const auto clen = r.get<std::uint32_t>("config length");
  ck.config_text = r.text(clen, "config text");
  if (r.remaining() != 0) throw FormatError("UGCK: trailing bytes", r.offset());
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ck);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Checkpoint snapshot(const gcnext::Model& model, const RunConfig& cfg, const ad::Adam* opt) {
  Checkpoint ck;
  RunConfig c = cfg;
  c.model = model.config;
  c.data.dims = c.model.dims;
  ck.config_text = to_text(c);
  for (const auto* p : model.parameters()) ck.tensors.emplace_back(p->name, p->value);
  if (opt != nullptr) {
    ck.tensors.emplace_back("adam.step", Tensor::scalar(static_cast<double>(opt->steps_taken())));
    for (const auto& [name, mom] : opt->state()) {
      ck.tensors.emplace_back("adam.m." + name, mom.m);
      ck.tensors.emplace_back("adam.v." + name, mom.v);
    }
  }
  return ck;
}

Restored restore(const Checkpoint& ck) {
  RunConfig cfg = parse_config_text(ck.config_text);
  gcnext::Model model = gcnext::build_skeleton(cfg.model);
  for (auto* p : model.parameters()) {
    const Tensor* t = ck.find(p->name);
    if (t == nullptr) throw FormatError("UGCK: missing tensor '" + p->name + "'", 0);
    if (t->shape() != p->value.shape()) {
      throw FormatError("UGCK: tensor '" + p->name + "' has shape " + shape_to_string(t->shape()) +
                        ", model expects " + shape_to_string(p->value.shape()), 0);
    }
    p->value = *t;
  }
  ad::Adam opt(cfg.train.adam, cfg.train.schedule);
  if (const Tensor* step = ck.find("adam.step")) {
    opt.set_steps_taken(static_cast<std::size_t>((*step)[0]));
    for (const auto& [name, t] : ck.tensors) {
      if (name.rfind("adam.m.", 0) == 0) opt.state()[name.substr(7)].m = t;
      if (name.rfind("adam.v.", 0) == 0) opt.state()[name.substr(7)].v = t;
    }
  }
  return Restored{std::move(cfg), std::move(model), std::move(opt)};
}

}  // namespace ugc
