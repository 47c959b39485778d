#include "pyrexpose/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "pyrexpose/error.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'Y', 'R', 'X'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::string path) : b_(bytes), path_(std::move(path)) {}

  bool at_end() const { return pos_ == b_.size(); }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

  void floats(std::vector<float>& out, std::size_t n, const char* what) {
    if (n > (b_.size() - pos_) / 4) fail(std::string("truncated ") + what);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t v = 0;
      for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_ + 4 * i + k]) << (8 * k);
      out[i] = std::bit_cast<float>(v);
    }
    pos_ += 4 * n;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw CheckpointError(path_ + ": " + msg); }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > b_.size() - pos_) fail(std::string("truncated ") + what);
  }
  const std::vector<std::uint8_t>& b_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  const json meta = {{"format_version", kCheckpointVersion},
                     {"model", ckpt.config.to_json()},
                     {"tensor_count", ckpt.tensors.size()},
                     {"extra", ckpt.extra}};
  const std::string meta_s = meta.dump();
  put_u32(out, static_cast<std::uint32_t>(meta_s.size()));
  out.insert(out.end(), meta_s.begin(), meta_s.end());
  for (const auto& [name, t] : ckpt.tensors) {
    std::size_t numel = 1;
    for (auto d : t.dims) numel *= d;
    if (numel != t.data.size()) throw CheckpointError("tensor '" + name + "' payload does not match its dims");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }

  // Write-then-rename so readers never observe a partial file.
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(tmp.string() + ": cannot open for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(path.string() + ": cannot open checkpoint");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());

  if (r.str(4, "magic") != std::string(kMagic, 4)) r.fail("bad magic (not a PYRX checkpoint)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));
  const std::uint32_t meta_len = r.u32("metadata length");
  json meta;
  try {
    meta = json::parse(r.str(meta_len, "metadata"));
  } catch (const json::parse_error& e) {
    r.fail(std::string("corrupt metadata: ") + e.what());
  }

  Checkpoint ckpt;
  std::size_t expected = 0;
  try {
    ckpt.config = ModelConfig::from_json(meta.at("model"));
    expected = meta.at("tensor_count").get<std::size_t>();
    if (meta.contains("extra")) ckpt.extra = meta.at("extra");
  } catch (const std::exception& e) {
    r.fail(std::string("invalid metadata: ") + e.what());
  }

  std::set<std::string> seen;
  while (!r.at_end()) {
    const std::uint32_t name_len = r.u32("record header");
    std::string name = r.str(name_len, "tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) r.fail("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    CheckpointTensor t;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.dims.push_back(r.u32("tensor dims"));
      numel *= t.dims.back();
    }
    r.floats(t.data, numel, ("payload of '" + name + "'").c_str());
    if (!seen.insert(name).second) r.fail("duplicate tensor '" + name + "'");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (ckpt.tensors.size() != expected) {
    r.fail("truncated: found " + std::to_string(ckpt.tensors.size()) + " of " + std::to_string(expected) + " tensors");
  }
  return ckpt;
}

Checkpoint load_checkpoint(const fs::path& path, const ModelConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  if (!(c.config == expected)) {
    throw CheckpointError(path.string() + ": config mismatch: checkpoint has " + c.config.to_json().dump() +
                          ", expected " + expected.to_json().dump());
  }
  return c;
}

namespace {

template <typename T>
void append(Checkpoint& c, const ad::ParameterSet<T>& params) {
  for (const auto& [name, t] : params) {
    const ad::Shape s = t.shape();
    CheckpointTensor ct;
    ct.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
               static_cast<std::uint32_t>(s.w)};
    ct.data.assign(t.values().begin(), t.values().end());
    c.tensors.emplace_back(name, std::move(ct));
  }
}

template <typename T>
void fill(ad::ParameterSet<T>& params, const Checkpoint& c, std::set<std::string>& used) {
  for (auto& [name, t] : params) {
    const CheckpointTensor* ct = c.find(name);
    if (!ct) throw CheckpointError("checkpoint is missing parameter '" + name + "'");
    const ad::Shape s = t.shape();
    const std::vector<std::uint32_t> want = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                             static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (ct->dims != want) throw CheckpointError("checkpoint tensor '" + name + "' has the wrong shape");
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(ct->data[i]);
    used.insert(name);
  }
}

}  // namespace

template <typename T>
Checkpoint to_checkpoint(const Model<T>& model, json extra) {
  Checkpoint c;
  c.config = model.config;
  c.extra = std::move(extra);
  append(c, model.generator.params());
  append(c, model.discriminator.params());
  return c;
}

template <typename T>
void restore(Model<T>& model, const Checkpoint& ckpt) {
  if (!(model.config == ckpt.config)) throw CheckpointError("config mismatch between model and checkpoint");
  std::set<std::string> used;
  fill(model.generator.params(), ckpt, used);
  fill(model.discriminator.params(), ckpt, used);
  for (const auto& [name, t] : ckpt.tensors)
    if (!used.contains(name)) throw CheckpointError("checkpoint has unknown tensor '" + name + "'");
}

template Checkpoint to_checkpoint(const Model<float>&, json);
template Checkpoint to_checkpoint(const Model<double>&, json);
template void restore(Model<float>&, const Checkpoint&);
template void restore(Model<double>&, const Checkpoint&);

}  // namespace pyrexpose
