#include "br/blob.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "br/error.hpp"

namespace br {
namespace {

constexpr char kMagic[8] = {'B', 'R', 'B', 'L', 'O', 'B', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& in) : in_(in) {}
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::string str() {
    const std::size_t n = u32();
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool magic() {
    need(sizeof(kMagic));
    const bool ok = std::memcmp(in_.data(), kMagic, sizeof(kMagic)) == 0;
    pos_ += sizeof(kMagic);
    return ok;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw Error("truncated blob");
  }
  const std::vector<unsigned char>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

const BlobTensor& Blob::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw Error("blob has no tensor '" + name + "'");
}

std::optional<std::string> Blob::get(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) return std::nullopt;
  return it->second;
}

const std::string& Blob::require(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw Error("blob is missing metadata '" + key + "'");
  return it->second;
}

std::vector<unsigned char> Blob::serialize() const {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dtype));
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.str(v);
  }
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u64(t.values.size());
    for (double v : t.values) {
      if (dtype == BlobDType::f32) {
        w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      } else {
        w.u64(std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  return w.take();
}

Blob Blob::deserialize(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (!r.magic()) throw Error("not a blob (bad magic)");
  if (r.u32() != kVersion) throw Error("unsupported blob version");
  Blob b;
  const std::uint32_t dt = r.u32();
  if (dt != 1 && dt != 2) throw Error("unsupported blob dtype");
  b.dtype = static_cast<BlobDType>(dt);
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    b.meta[k] = r.str();
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    BlobTensor t;
    t.name = r.str();
    const std::uint64_t count = r.u64();
    const std::uint64_t width = b.dtype == BlobDType::f32 ? 4 : 8;
    if (count > bytes.size() / width) throw Error("truncated blob");
    t.values.resize(count);
    for (double& v : t.values) {
      v = b.dtype == BlobDType::f32 ? static_cast<double>(std::bit_cast<float>(r.u32()))
                                    : std::bit_cast<double>(r.u64());
    }
    b.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw Error("trailing bytes after blob");
  return b;
}

void Blob::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

Blob Blob::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace br
