#include "br/reghead.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "br/csv.hpp"
#include "br/error.hpp"

namespace br {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_dims(std::span<const double> pooled, const HeadParams& p) {
  if (pooled.size() != p.dim) {
    throw Error("head input has dim " + std::to_string(pooled.size()) + ", expected " +
                std::to_string(p.dim));
  }
}

void check_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error("non-finite activation");
  }
}

// hidden pre-activations z = W1^T h + b1
std::vector<double> first_layer(std::span<const double> pooled, const HeadParams& p) {
  std::vector<double> z(p.b1);
  for (std::size_t i = 0; i < p.dim; ++i) {
    const double hi = pooled[i];
    const double* row = &p.w1[i * p.hidden];
    for (std::size_t j = 0; j < p.hidden; ++j) z[j] += hi * row[j];
  }
  return z;
}

}  // namespace

HeadParams HeadParams::zeros(std::size_t dim, double dropout_p) {
  if (dim < 2 || dim % 2 != 0) throw Error("head dim must be even and >= 2");
  HeadParams p;
  p.dim = dim;
  p.hidden = dim / 2;
  p.dropout_p = dropout_p;
  p.w1.assign(dim * p.hidden, 0.0);
  p.b1.assign(p.hidden, 0.0);
  p.w2.assign(p.hidden, 0.0);
  p.b2 = 0.0;
  p.validate();
  return p;
}

HeadParams HeadParams::random(std::size_t dim, std::uint64_t seed, double dropout_p) {
  HeadParams p = zeros(dim, dropout_p);
  SplitMix64 rng(seed);
  const double a1 = 1.0 / std::sqrt(static_cast<double>(p.dim));
  const double a2 = 1.0 / std::sqrt(static_cast<double>(p.hidden));
  for (double& v : p.w1) v = rng.uniform(-a1, a1);
  for (double& v : p.b1) v = rng.uniform(-a1, a1);
  for (double& v : p.w2) v = rng.uniform(-a2, a2);
  p.b2 = rng.uniform(-a2, a2);
  return p;
}

void HeadParams::validate() const {
  if (dim < 2 || hidden != dim / 2 || w1.size() != dim * hidden || b1.size() != hidden ||
      w2.size() != hidden) {
    throw Error("head parameter shapes inconsistent with dim " + std::to_string(dim));
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("dropout probability must be in [0, 1)");
  check_finite(w1);
  check_finite(b1);
  check_finite(w2);
  if (!std::isfinite(b2)) throw Error("non-finite activation");
}

Blob HeadParams::to_blob() const {
  Blob b;
  b.dtype = BlobDType::f64;
  b.meta["kind"] = "head";
  b.meta["dim"] = std::to_string(dim);
  b.meta["dropout_p"] = format_double(dropout_p);
  b.tensors.push_back({"w1", w1});
  b.tensors.push_back({"b1", b1});
  b.tensors.push_back({"w2", w2});
  b.tensors.push_back({"b2", {b2}});
  return b;
}

HeadParams HeadParams::from_blob(const Blob& blob) {
  if (blob.get("kind") != "head") throw Error("blob is not a regression head");
  HeadParams p = zeros(std::stoull(blob.require("dim")), std::stod(blob.require("dropout_p")));
  p.w1 = blob.tensor("w1").values;
  p.b1 = blob.tensor("b1").values;
  p.w2 = blob.tensor("w2").values;
  const auto& b2 = blob.tensor("b2").values;
  if (b2.size() != 1) throw Error("head blob b2 must be scalar");
  p.b2 = b2[0];
  p.validate();
  return p;
}

double scaled_sigmoid(double x) {
  // Far in either tail 1 + 4*sigma(x) rounds onto the bound itself; the exact
  // value is always strictly inside, so snap to the nearest interior double.
  static const double lo = std::nextafter(1.0, 5.0);
  static const double hi = std::nextafter(5.0, 1.0);
  return std::clamp(1.0 + 4.0 * sigmoid(x), lo, hi);
}

std::vector<double> masked_mean_pool(const HiddenStates& hs) {
  if (hs.mask.size() != hs.length || hs.values.size() != hs.length * hs.dim) {
    throw Error("hidden state shape mismatch");
  }
  std::vector<double> acc(hs.dim, 0.0);
  double count = 0.0;
  for (std::size_t t = 0; t < hs.length; ++t) {
    if (hs.mask[t] == 0) continue;
    const auto row = hs.row(t);
    for (std::size_t k = 0; k < hs.dim; ++k) acc[k] += static_cast<double>(row[k]);
    count += 1.0;
  }
  if (count == 0.0) throw Error("no valid tokens");
  for (double& v : acc) v /= count;
  return acc;
}

std::vector<double> sample_dropout_scale(std::size_t hidden, double p, SplitMix64& rng) {
  std::vector<double> scale(hidden, 1.0);
  if (p <= 0.0) return scale;
  const double keep = 1.0 / (1.0 - p);
  for (double& s : scale) s = rng.uniform01() < p ? 0.0 : keep;
  return scale;
}

HeadForward head_forward(std::span<const double> pooled, const HeadParams& params, HeadMode mode,
                         SplitMix64* rng) {
  if (mode == HeadMode::eval) {
    return head_forward_with_mask(pooled, params, std::vector<double>(params.hidden, 1.0));
  }
  if (rng == nullptr) throw Error("train-mode forward requires a dropout generator");
  return head_forward_with_mask(pooled, params, sample_dropout_scale(params.hidden, params.dropout_p, *rng));
}

HeadForward head_forward_with_mask(std::span<const double> pooled, const HeadParams& params,
                                   std::span<const double> dropout_scale) {
  check_dims(pooled, params);
  check_finite(pooled);
  if (dropout_scale.size() != params.hidden) throw Error("dropout mask has wrong length");
  const std::vector<double> z = first_layer(pooled, params);
  double x = params.b2;
  for (std::size_t j = 0; j < params.hidden; ++j) {
    if (z[j] > 0.0) x += params.w2[j] * z[j] * dropout_scale[j];
  }
  if (!std::isfinite(x)) throw Error("non-finite activation");
  HeadForward out;
  out.prediction = {x, scaled_sigmoid(x)};
  out.dropout_scale.assign(dropout_scale.begin(), dropout_scale.end());
  return out;
}

HeadBackward head_backward(std::span<const double> pooled, const HeadParams& params, double target,
                           std::span<const double> dropout_scale) {
  check_dims(pooled, params);
  if (dropout_scale.size() != params.hidden) throw Error("dropout mask has wrong length");
  const std::vector<double> z = first_layer(pooled, params);
  double x = params.b2;
  for (std::size_t j = 0; j < params.hidden; ++j) {
    if (z[j] > 0.0) x += params.w2[j] * z[j] * dropout_scale[j];
  }
  const double s = sigmoid(x);
  const double y_hat = scaled_sigmoid(x);
  const double err = y_hat - target;

  HeadBackward out;
  out.loss = err * err;
  out.params = HeadParams::zeros(params.dim, params.dropout_p);
  out.d_pool.assign(params.dim, 0.0);
  // dL/dx = 2 (y_hat - y) * 4 sigma (1 - sigma)
  const double dx = 2.0 * err * 4.0 * s * (1.0 - s);
  out.params.b2 = dx;
  std::vector<double> dz(params.hidden, 0.0);
  for (std::size_t j = 0; j < params.hidden; ++j) {
    if (z[j] <= 0.0) continue;
    out.params.w2[j] = dx * z[j] * dropout_scale[j];
    dz[j] = dx * params.w2[j] * dropout_scale[j];
  }
  out.params.b1 = dz;
  for (std::size_t i = 0; i < params.dim; ++i) {
    const double hi = pooled[i];
    const double* wrow = &params.w1[i * params.hidden];
    double* grow = &out.params.w1[i * params.hidden];
    double acc = 0.0;
    for (std::size_t j = 0; j < params.hidden; ++j) {
      grow[j] = hi * dz[j];
      acc += wrow[j] * dz[j];
    }
    out.d_pool[i] = acc;
  }
  return out;
}

}  // namespace br
