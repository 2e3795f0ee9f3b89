#include "br/imageprep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "br/error.hpp"

namespace br::image {
namespace {

struct AxisTap {
  std::size_t lo = 0;
  std::size_t hi = 0;
  float t = 0.0f;
};

std::vector<AxisTap> axis_taps(std::size_t in, std::size_t out) {
  std::vector<AxisTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double max_src = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, max_src);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    taps[i].lo = lo;
    taps[i].hi = std::min(lo + 1, in - 1);
    taps[i].t = static_cast<float>(src - static_cast<double>(lo));
  }
  return taps;
}

void check_image(const ImageTensor& img) {
  if (img.height == 0 || img.width == 0) throw Error("degenerate image");
  if (img.data.size() != img.height * img.width * ImageTensor::kChannels) {
    throw Error("image data length does not match its shape");
  }
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated raw tensor header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

std::size_t read_pnm_int(std::istream& in, const std::string& what) {
  skip_pnm_space(in);
  long long v = -1;
  if (!(in >> v) || v <= 0) throw Error("invalid PPM header field: " + what);
  return static_cast<std::size_t>(v);
}

}  // namespace

void ImageConfig::validate() const {
  if (resolution == 0 || patch == 0 || shuffle == 0) throw Error("invalid image config");
  if (resolution % patch != 0) throw Error("resolution/patch mismatch");
  if ((resolution / patch) % shuffle != 0) throw Error("shuffle factor mismatch");
  for (float s : std) {
    if (s == 0.0f || !std::isfinite(s)) throw Error("invalid normalization");
  }
}

std::size_t ImageConfig::visual_token_count() const {
  const std::size_t g = resolution / patch / shuffle;
  return g * g;
}

std::size_t ImageConfig::visual_token_dim() const {
  return patch * patch * ImageTensor::kChannels * shuffle * shuffle;
}

ImageTensor resize_bilinear(const ImageTensor& img, std::size_t out_h, std::size_t out_w) {
  check_image(img);
  if (out_h == 0 || out_w == 0) throw Error("degenerate image");
  const auto ty = axis_taps(img.height, out_h);
  const auto tx = axis_taps(img.width, out_w);
  ImageTensor out{out_h, out_w, std::vector<float>(out_h * out_w * ImageTensor::kChannels)};
  for (std::size_t y = 0; y < out_h; ++y) {
    const AxisTap& vy = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const AxisTap& vx = tx[x];
      for (std::size_t c = 0; c < ImageTensor::kChannels; ++c) {
        // std::lerp is exact at t = 0 and t = 1 and monotone, so results stay
        // inside the hull of the four taps.
        const float top = std::lerp(img.at(vy.lo, vx.lo, c), img.at(vy.lo, vx.hi, c), vx.t);
        const float bot = std::lerp(img.at(vy.hi, vx.lo, c), img.at(vy.hi, vx.hi, c), vx.t);
        out.at(y, x, c) = std::lerp(top, bot, vy.t);
      }
    }
  }
  return out;
}

ImageTensor normalize(const ImageTensor& img, std::span<const float, 3> mean,
                      std::span<const float, 3> std) {
  check_image(img);
  for (float s : std) {
    if (s == 0.0f || !std::isfinite(s)) throw Error("invalid normalization");
  }
  ImageTensor out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::size_t c = i % ImageTensor::kChannels;
    out.data[i] = (out.data[i] - mean[c]) / std[c];
  }
  return out;
}

TokenGrid patchify(const ImageTensor& img, std::size_t patch) {
  check_image(img);
  if (patch == 0 || img.height != img.width || img.height % patch != 0) {
    throw Error("resolution/patch mismatch");
  }
  const std::size_t g = img.height / patch;
  const std::size_t dim = patch * patch * ImageTensor::kChannels;
  TokenGrid out{g, dim, std::vector<float>(g * g * dim)};
  float* dst = out.data.data();
  for (std::size_t py = 0; py < g; ++py) {
    for (std::size_t px = 0; px < g; ++px) {
      for (std::size_t y = 0; y < patch; ++y) {
        const float* row = &img.data[((py * patch + y) * img.width + px * patch) * ImageTensor::kChannels];
        dst = std::copy(row, row + patch * ImageTensor::kChannels, dst);
      }
    }
  }
  return out;
}

TokenGrid pixel_shuffle(const TokenGrid& grid, std::size_t r) {
  if (r == 0 || grid.grid % r != 0) throw Error("shuffle factor mismatch");
  if (grid.data.size() != grid.count() * grid.dim) throw Error("token grid data length mismatch");
  const std::size_t g = grid.grid / r;
  TokenGrid out{g, grid.dim * r * r, std::vector<float>(grid.data.size())};
  float* dst = out.data.data();
  for (std::size_t oy = 0; oy < g; ++oy) {
    for (std::size_t ox = 0; ox < g; ++ox) {
      for (std::size_t a = 0; a < r; ++a) {
        for (std::size_t b = 0; b < r; ++b) {
          const auto src = grid.token((oy * r + a) * grid.grid + (ox * r + b));
          dst = std::copy(src.begin(), src.end(), dst);
        }
      }
    }
  }
  return out;
}

VisualTokens preprocess(const ImageTensor& img, const ImageConfig& cfg) {
  cfg.validate();
  const ImageTensor resized = resize_bilinear(img, cfg.resolution, cfg.resolution);
  const ImageTensor norm = normalize(resized, cfg.mean, cfg.std);
  TokenGrid shuffled = pixel_shuffle(patchify(norm, cfg.patch), cfg.shuffle);
  return {shuffled.count(), shuffled.dim, std::move(shuffled.data)};
}

ImageTensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image: " + path.string());
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') {
    throw Error("not a binary PPM (P6): " + path.string());
  }
  const std::size_t w = read_pnm_int(in, "width");
  const std::size_t h = read_pnm_int(in, "height");
  const std::size_t maxval = read_pnm_int(in, "maxval");
  if (maxval != 255) throw Error("unsupported PPM maxval (expected 255): " + path.string());
  in.get();  // single whitespace byte before the raster
  std::vector<unsigned char> raw(w * h * 3);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error("truncated PPM raster: " + path.string());
  }
  ImageTensor img{h, w, std::vector<float>(raw.size())};
  for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = static_cast<float>(raw[i]) / 255.0f;
  return img;
}

void write_ppm(const std::filesystem::path& path, const ImageTensor& img) {
  check_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image: " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> raw(img.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<unsigned char>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

ImageTensor read_raw_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image: " + path.string());
  const std::size_t h = read_u32_le(in);
  const std::size_t w = read_u32_le(in);
  if (h == 0 || w == 0) throw Error("degenerate image");
  ImageTensor img{h, w, std::vector<float>(h * w * 3)};
  for (float& v : img.data) {
    const std::uint32_t bits = read_u32_le(in);
    v = std::bit_cast<float>(bits);
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw Error("raw tensor value outside [0, 1]: " + path.string());
    }
  }
  return img;
}

void write_raw_tensor(const std::filesystem::path& path, const ImageTensor& img) {
  check_image(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write image: " + path.string());
  write_u32_le(out, static_cast<std::uint32_t>(img.height));
  write_u32_le(out, static_cast<std::uint32_t>(img.width));
  for (float v : img.data) write_u32_le(out, std::bit_cast<std::uint32_t>(v));
}

ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image: " + path.string());
  char magic[2] = {};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
  return read_raw_tensor(path);
}

}  // namespace br::image
