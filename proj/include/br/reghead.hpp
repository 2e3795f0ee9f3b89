#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "br/backbone.hpp"
#include "br/blob.hpp"
#include "br/rng.hpp"

namespace br {

// Linear(d, d/2) -> ReLU -> dropout -> Linear(d/2, 1). W1 is stored row-major
// as d x (d/2): w1[i * hidden + j] connects input i to hidden unit j.
struct HeadParams {
  std::size_t dim = 0;
  std::size_t hidden = 0;
  double dropout_p = 0.1;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static HeadParams zeros(std::size_t dim, double dropout_p = 0.1);
  // uniform(+-1/sqrt(fan_in)) for weights and biases of each layer.
  static HeadParams random(std::size_t dim, std::uint64_t seed, double dropout_p = 0.1);

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
  void validate() const;

  Blob to_blob() const;
  static HeadParams from_blob(const Blob& blob);

  bool operator==(const HeadParams&) const = default;
};

// Same shapes as HeadParams; also the gradient container.
using HeadGrads = HeadParams;

struct Prediction {
  double logit = 0.0;
  double rating = 3.0;
};

enum class HeadMode { train, eval };

struct HeadForward {
  Prediction prediction;
  // Per hidden unit multiplier applied after ReLU: 0 or 1/(1-p) in train mode,
  // 1 in eval mode. Pass back unchanged to head_backward.
  std::vector<double> dropout_scale;
};

struct HeadBackward {
  HeadGrads params;
  std::vector<double> d_pool;
  double loss = 0.0;
};

// 1 + 4 * sigmoid(x), bounded to the open interval (1, 5).
double scaled_sigmoid(double x);

// sum_i m_i h_i / sum_i m_i, accumulated in double.
std::vector<double> masked_mean_pool(const HiddenStates& hs);

std::vector<double> sample_dropout_scale(std::size_t hidden, double p, SplitMix64& rng);

// Train mode draws a fresh inverted-dropout mask from `rng` (required);
// eval mode ignores it.
HeadForward head_forward(std::span<const double> pooled, const HeadParams& params, HeadMode mode,
                         SplitMix64* rng = nullptr);

HeadForward head_forward_with_mask(std::span<const double> pooled, const HeadParams& params,
                                   std::span<const double> dropout_scale);

// Exact gradients of (y_hat - target)^2 through the scaled sigmoid, the second
// linear layer, the dropout multipliers, ReLU and the first linear layer.
HeadBackward head_backward(std::span<const double> pooled, const HeadParams& params, double target,
                           std::span<const double> dropout_scale);

}  // namespace br
