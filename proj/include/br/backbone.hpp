#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "br/blob.hpp"
#include "br/imageprep.hpp"

namespace br {

struct BackboneConfig {
  std::size_t d_model = 576;
  std::size_t n_mix_layers = 2;
  std::uint64_t seed = 0;
  std::size_t vocab_size = 258;
  std::size_t visual_dim = 6912;  // 3 * patch^2 * shuffle^2 for the default image config

  void validate() const;
};

// Final hidden states for one sequence: T rows of dimension d plus the mask
// (visual positions always 1). Masked rows are exactly zero.
struct HiddenStates {
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> mask;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

// Frozen, seeded stand-in for the vision encoder + connector + decoder stack.
// Visual tokens are linearly projected to d, text ids are embedded, the two are
// concatenated as [visual; text], and n_mix_layers token-wise blocks
// h <- h + tanh(h W + b) are applied.
class Backbone {
 public:
  using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using RowVector = Eigen::Matrix<float, 1, Eigen::Dynamic>;

  // Weights are drawn from SplitMix64(cfg.seed) in this order, each row-major:
  //   visual projection  visual_dim x d   uniform(+-sqrt(3/visual_dim))
  //   token embedding    vocab x d        uniform(+-sqrt(3))
  //   per mix layer:     W d x d, b d     uniform(+-1/sqrt(d))
  explicit Backbone(const BackboneConfig& cfg);

  const BackboneConfig& config() const { return cfg_; }

  HiddenStates encode(const image::VisualTokens& visual, std::span<const std::int32_t> ids,
                      std::span<const std::uint8_t> mask) const;

  Blob to_blob() const;
  static Backbone from_blob(const Blob& blob);

  // FNV-1a over the serialized weights; equal iff the weights are bitwise equal.
  std::uint64_t fingerprint() const;

  const Matrix& visual_projection() const { return visual_proj_; }
  const Matrix& token_embedding() const { return embed_; }

 private:
  Backbone() = default;

  BackboneConfig cfg_;
  Matrix visual_proj_;
  Matrix embed_;
  std::vector<Matrix> mix_w_;
  std::vector<RowVector> mix_b_;
};

}  // namespace br
