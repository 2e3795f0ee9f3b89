#include "br/backbone.hpp"

#include <cmath>
#include <string>

#include "br/error.hpp"
#include "br/rng.hpp"

namespace br {
namespace {

void fill_uniform(Backbone::Matrix& m, SplitMix64& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  }
}

void fill_uniform(Backbone::RowVector& v, SplitMix64& rng, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.uniform(-bound, bound));
}

std::vector<double> to_doubles(const float* p, std::size_t n) { return {p, p + n}; }

void copy_into(float* dst, const BlobTensor& t, std::size_t expected) {
  if (t.values.size() != expected) throw Error("backbone blob tensor '" + t.name + "' has wrong size");
  for (std::size_t i = 0; i < expected; ++i) dst[i] = static_cast<float>(t.values[i]);
}

std::size_t parse_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

}  // namespace

void BackboneConfig::validate() const {
  if (d_model < 2 || d_model % 2 != 0) throw Error("invalid backbone config: d_model must be even and >= 2");
  if (n_mix_layers < 1) throw Error("invalid backbone config: n_mix_layers must be >= 1");
  if (vocab_size < 1 || visual_dim < 1) throw Error("invalid backbone config");
}

Backbone::Backbone(const BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  SplitMix64 rng(cfg_.seed);
  visual_proj_.resize(static_cast<Eigen::Index>(cfg_.visual_dim), d);
  fill_uniform(visual_proj_, rng, std::sqrt(3.0 / static_cast<double>(cfg_.visual_dim)));
  embed_.resize(static_cast<Eigen::Index>(cfg_.vocab_size), d);
  fill_uniform(embed_, rng, std::sqrt(3.0));
  const double mix_bound = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
  for (std::size_t l = 0; l < cfg_.n_mix_layers; ++l) {
    Matrix w(d, d);
    RowVector b(d);
    fill_uniform(w, rng, mix_bound);
    fill_uniform(b, rng, mix_bound);
    mix_w_.push_back(std::move(w));
    mix_b_.push_back(std::move(b));
  }
}

HiddenStates Backbone::encode(const image::VisualTokens& visual, std::span<const std::int32_t> ids,
                              std::span<const std::uint8_t> mask) const {
  if (ids.size() != mask.size()) throw Error("token ids/mask length mismatch");
  if (visual.count > 0 && visual.dim != cfg_.visual_dim) {
    throw Error("dimension mismatch: visual tokens have dim " + std::to_string(visual.dim) +
                ", backbone expects " + std::to_string(cfg_.visual_dim));
  }
  if (visual.data.size() != visual.count * visual.dim) throw Error("visual token data length mismatch");
  const std::size_t T = visual.count + ids.size();
  if (T == 0) throw Error("empty sequence");
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
      throw Error("token id " + std::to_string(id) + " outside vocabulary");
    }
  }

  HiddenStates out;
  out.length = T;
  out.dim = cfg_.d_model;
  out.mask.assign(visual.count, 1);
  out.mask.insert(out.mask.end(), mask.begin(), mask.end());
  out.values.assign(T * cfg_.d_model, 0.0f);

  // Rows past the last valid position are padding; they are left at zero and
  // never enter the mixing layers.
  std::size_t active = T;
  while (active > 0 && out.mask[active - 1] == 0) --active;
  if (active == 0) return out;

  const auto d = static_cast<Eigen::Index>(cfg_.d_model);
  Eigen::Map<Matrix> H(out.values.data(), static_cast<Eigen::Index>(active), d);
  const auto nv = static_cast<Eigen::Index>(visual.count);
  if (nv > 0) {
    Eigen::Map<const Matrix> V(visual.data.data(), nv, static_cast<Eigen::Index>(visual.dim));
    H.topRows(nv).noalias() = V * visual_proj_;
  }
  for (Eigen::Index i = nv; i < H.rows(); ++i) {
    H.row(i) = embed_.row(ids[static_cast<std::size_t>(i - nv)]);
  }
  Matrix pre(H.rows(), d);
  for (std::size_t l = 0; l < mix_w_.size(); ++l) {
    pre.noalias() = H * mix_w_[l];
    pre.rowwise() += mix_b_[l];
    H.array() += pre.array().tanh();
  }
  for (std::size_t i = 0; i < active; ++i) {
    if (out.mask[i] == 0) H.row(static_cast<Eigen::Index>(i)).setZero();
  }
  return out;
}

Blob Backbone::to_blob() const {
  Blob b;
  b.dtype = BlobDType::f32;
  b.meta["kind"] = "backbone";
  b.meta["d_model"] = std::to_string(cfg_.d_model);
  b.meta["n_mix_layers"] = std::to_string(cfg_.n_mix_layers);
  b.meta["seed"] = std::to_string(cfg_.seed);
  b.meta["vocab_size"] = std::to_string(cfg_.vocab_size);
  b.meta["visual_dim"] = std::to_string(cfg_.visual_dim);
  b.tensors.push_back({"visual_proj", to_doubles(visual_proj_.data(), visual_proj_.size())});
  b.tensors.push_back({"embedding", to_doubles(embed_.data(), embed_.size())});
  for (std::size_t l = 0; l < mix_w_.size(); ++l) {
    b.tensors.push_back({"mix" + std::to_string(l) + ".w", to_doubles(mix_w_[l].data(), mix_w_[l].size())});
    b.tensors.push_back({"mix" + std::to_string(l) + ".b", to_doubles(mix_b_[l].data(), mix_b_[l].size())});
  }
  return b;
}

Backbone Backbone::from_blob(const Blob& blob) {
  if (blob.get("kind") != "backbone") throw Error("blob is not a backbone");
  Backbone bb;
  bb.cfg_.d_model = parse_size(blob.require("d_model"));
  bb.cfg_.n_mix_layers = parse_size(blob.require("n_mix_layers"));
  bb.cfg_.seed = std::stoull(blob.require("seed"));
  bb.cfg_.vocab_size = parse_size(blob.require("vocab_size"));
  bb.cfg_.visual_dim = parse_size(blob.require("visual_dim"));
  bb.cfg_.validate();
  const auto d = static_cast<Eigen::Index>(bb.cfg_.d_model);
  bb.visual_proj_.resize(static_cast<Eigen::Index>(bb.cfg_.visual_dim), d);
  copy_into(bb.visual_proj_.data(), blob.tensor("visual_proj"), bb.visual_proj_.size());
  bb.embed_.resize(static_cast<Eigen::Index>(bb.cfg_.vocab_size), d);
  copy_into(bb.embed_.data(), blob.tensor("embedding"), bb.embed_.size());
  for (std::size_t l = 0; l < bb.cfg_.n_mix_layers; ++l) {
    Matrix w(d, d);
    RowVector b(d);
    copy_into(w.data(), blob.tensor("mix" + std::to_string(l) + ".w"), w.size());
    copy_into(b.data(), blob.tensor("mix" + std::to_string(l) + ".b"), b.size());
    bb.mix_w_.push_back(std::move(w));
    bb.mix_b_.push_back(std::move(b));
  }
  return bb;
}

std::uint64_t Backbone::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_blob().serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace br
