#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace br::image {

// H x W x 3, row-major, channel-interleaved.
struct ImageTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  static constexpr std::size_t kChannels = 3;

  float at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * kChannels + c];
  }
  float& at(std::size_t y, std::size_t x, std::size_t c) {
    return data[(y * width + x) * kChannels + c];
  }
};

// g x g tokens of dimension `dim`, row-major over the grid.
struct TokenGrid {
  std::size_t grid = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  std::size_t count() const { return grid * grid; }
  std::span<const float> token(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

struct VisualTokens {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> data;  // count x dim
};

struct ImageConfig {
  std::size_t resolution = 384;
  std::size_t patch = 16;
  std::size_t shuffle = 3;
  std::array<float, 3> mean{0.5f, 0.5f, 0.5f};
  std::array<float, 3> std{0.5f, 0.5f, 0.5f};

  void validate() const;
  std::size_t visual_token_count() const;
  std::size_t visual_token_dim() const;
};

// Half-pixel-centre bilinear: src = (dst + 0.5) * in/out - 0.5, clamped to
// [0, in-1] on each axis. Every output is a convex combination of at most four
// input pixels.
ImageTensor resize_bilinear(const ImageTensor& img, std::size_t out_h, std::size_t out_w);

// Per-channel (x - mean) / std. The result is no longer bounded to [0, 1].
ImageTensor normalize(const ImageTensor& img, std::span<const float, 3> mean,
                      std::span<const float, 3> std);

// Non-overlapping p x p patches in row-major grid order; each patch is
// flattened as (row, col, channel).
TokenGrid patchify(const ImageTensor& img, std::size_t patch);

// Each output token concatenates its r x r input block in row-major order.
TokenGrid pixel_shuffle(const TokenGrid& grid, std::size_t r);

// resize -> normalize -> patchify -> pixel_shuffle. Output shape depends only
// on the config.
VisualTokens preprocess(const ImageTensor& img, const ImageConfig& cfg);

// Binary PPM (P6, maxval 255).
ImageTensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageTensor& img);

// Raw tensor: u32 LE height, u32 LE width, then H*W*3 float32 LE in [0, 1].
ImageTensor read_raw_tensor(const std::filesystem::path& path);
void write_raw_tensor(const std::filesystem::path& path, const ImageTensor& img);

// Dispatches on the file magic: "P6" -> PPM, otherwise raw tensor.
ImageTensor load_image(const std::filesystem::path& path);

}  // namespace br::image
