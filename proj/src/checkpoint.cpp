#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "psg/trainer.hpp"

namespace psg {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'G', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
const std::string kFirstMoment = "adam.m/";
const std::string kSecondMoment = "adam.v/";

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>(v >> (8 * i)));
  }
  void text(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }

  void array(const std::string& name, const Shape& shape, std::span<const double> values) {
    u32(static_cast<std::uint32_t>(name.size()));
    raw(name.data(), name.size());
    u32(static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) u64(e);
    for (double v : values) u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<long>(pos_),
                  bytes_.begin() + static_cast<long>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::string text() { return raw(u64()); }
  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    throw CheckpointError(origin_ + ": " + why);
  }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated at byte " + std::to_string(pos_));
  }

  std::vector<char> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

struct StoredArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

StoredArray read_array(Reader& in) {
  StoredArray a;
  a.name = in.raw(in.u32());
  const std::uint32_t rank = in.u32();
  if (rank > 8) in.fail("array " + a.name + " has rank " + std::to_string(rank));
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    a.shape.push_back(in.u64());
    if (a.shape.back() > (1ull << 32)) in.fail("array " + a.name + " extent too large");
    count *= a.shape.back();
    if (count > (1ull << 32)) in.fail("array " + a.name + " is too large");
  }
  a.values.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    a.values.push_back(static_cast<double>(std::bit_cast<float>(in.u32())));
  }
  return a;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.optimizer.m.size() != ckpt.params.size() ||
      ckpt.optimizer.v.size() != ckpt.params.size()) {
    throw CheckpointError("save_checkpoint: optimizer state does not match parameters");
  }
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.text(ckpt.config_text);
  w.text(ckpt.log_text);
  w.u64(ckpt.epoch);
  w.u64(ckpt.optimizer.step);
  w.u64(ckpt.seed);
  w.u32(static_cast<std::uint32_t>(3 * ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) w.array(name, t.shape(), t.values());
  std::size_t k = 0;
  for (const auto& [name, t] : ckpt.params) {
    w.array(kFirstMoment + name, t.shape(), ckpt.optimizer.m[k]);
    w.array(kSecondMoment + name, t.shape(), ckpt.optimizer.v[k]);
    ++k;
  }
  std::ofstream out(path, std::ios::binary);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw CheckpointError("cannot open " + path.string());
  Reader in({std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()},
            path.string());
  if (in.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    in.fail("not a checkpoint (bad magic)");
  }
  if (const auto v = in.u32(); v != kVersion) {
    in.fail("unsupported version " + std::to_string(v));
  }
  Checkpoint ckpt;
  ckpt.config_text = in.text();
  ckpt.log_text = in.text();
  ckpt.epoch = in.u64();
  ckpt.optimizer.step = in.u64();
  ckpt.seed = in.u64();
  const std::uint32_t count = in.u32();

  std::map<std::string, StoredArray> moments;
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredArray a = read_array(in);
    if (a.name.starts_with(kFirstMoment) || a.name.starts_with(kSecondMoment)) {
      const std::string key = a.name;
      if (!moments.emplace(key, std::move(a)).second) in.fail("duplicate array " + key);
    } else {
      if (ckpt.params.contains(a.name)) in.fail("duplicate array " + a.name);
      ckpt.params.add(a.name, a.shape, std::move(a.values));
    }
  }
  if (!in.done()) in.fail("trailing bytes after the last array");
  for (const auto& [name, t] : ckpt.params) {
    auto m = moments.find(kFirstMoment + name);
    auto v = moments.find(kSecondMoment + name);
    if (m == moments.end() || v == moments.end()) {
      in.fail("missing optimizer moments for " + name);
    }
    if (m->second.shape != t.shape() || v->second.shape != t.shape()) {
      in.fail("optimizer moments for " + name + " have the wrong shape");
    }
    ckpt.optimizer.m.push_back(std::move(m->second.values));
    ckpt.optimizer.v.push_back(std::move(v->second.values));
  }
  if (moments.size() != 2 * ckpt.params.size()) in.fail("orphan optimizer moments");
  return ckpt;
}

}  // namespace psg
