#include "typegan/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "typegan/errors.hpp"

namespace typegan {

namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

template <typename T>
void put(std::string& out, T value) {
  auto u = std::bit_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }

  std::string_view take(std::uint64_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::IoError, origin_ + ": corrupt checkpoint (" + what + ")");
  }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated");
  }

  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put(out, kVersion);
  const std::string meta = ckpt.meta.dump();
  put(out, static_cast<std::uint64_t>(meta.size()));
  out += meta;
  put(out, static_cast<std::uint64_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put(out, kDtypeF64);
    put(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put(out, static_cast<std::int64_t>(d));
    out.reserve(out.size() + static_cast<std::size_t>(t.numel()) * 8);
    for (double v : t.values()) put_f64(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.take(4) != std::string_view(kMagic, 4)) r.fail("bad magic");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  Checkpoint ckpt;
  const auto meta_len = r.get<std::uint64_t>();
  try {
    ckpt.meta = nlohmann::ordered_json::parse(r.take(meta_len));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("metadata: ") + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name(r.take(r.get<std::uint32_t>()));
    if (r.get<std::uint8_t>() != kDtypeF64) r.fail("unsupported dtype for " + name);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("rank too large for " + name);
    Shape shape(rank);
    std::int64_t numel = 1;
    for (auto& d : shape) {
      d = r.get<std::int64_t>();
      if (d < 0 || (d > 0 && numel > (std::int64_t{1} << 40) / d)) r.fail("bad shape for " + name);
      numel *= d;
    }
    const std::string_view raw = r.take(static_cast<std::uint64_t>(numel) * 8);
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::uint64_t u = 0;
      for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[k * 8 + b])) << (8 * b);
      values[k] = std::bit_cast<double>(u);
    }
    if (!ckpt.tensors.emplace(name, Tensor(std::move(shape), std::move(values))).second) r.fail("duplicate " + name);
  }
  if (!r.done()) r.fail("trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path.string());
}

std::map<std::string, Tensor> tensors_with_prefix(const Checkpoint& ckpt, std::string_view prefix) {
  std::map<std::string, Tensor> out;
  for (auto it = ckpt.tensors.lower_bound(std::string(prefix)); it != ckpt.tensors.end() && it->first.starts_with(prefix);
       ++it) {
    out.emplace(it->first, it->second);
  }
  return out;
}

}  // namespace typegan
