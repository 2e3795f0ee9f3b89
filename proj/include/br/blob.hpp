#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace br {

enum class BlobDType : std::uint32_t { f32 = 1, f64 = 2 };

struct BlobTensor {
  std::string name;
  std::vector<double> values;
};

// Little-endian container shared by backbone weights and head checkpoints.
//
//   "BRBLOB\0\0"  u32 version(=1)  u32 dtype
//   u32 n_meta   { u32 len, key bytes, u32 len, value bytes } * n_meta
//   u32 n_tensor { u32 len, name bytes, u64 count, count * (f32|f64) } * n_tensor
//
// Metadata is written in key order, so equal contents give equal bytes.
struct Blob {
  BlobDType dtype = BlobDType::f32;
  std::map<std::string, std::string> meta;
  std::vector<BlobTensor> tensors;

  const BlobTensor& tensor(const std::string& name) const;
  std::optional<std::string> get(const std::string& key) const;
  const std::string& require(const std::string& key) const;

  std::vector<unsigned char> serialize() const;
  static Blob deserialize(const std::vector<unsigned char>& bytes);

  void save(const std::filesystem::path& path) const;
  static Blob load(const std::filesystem::path& path);
};

}  // namespace br
