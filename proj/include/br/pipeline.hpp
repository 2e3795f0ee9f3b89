#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "br/backbone.hpp"
#include "br/imageprep.hpp"
#include "br/kvconfig.hpp"
#include "br/textprep.hpp"

namespace br {

// Everything that determines the pooled representation of a sample.
struct ModelConfig {
  text::PromptConfig prompt;
  image::ImageConfig image;
  BackboneConfig backbone;

  void validate() const;
  // Keys under `prefix` describing this config; checkpoints store them under
  // "model.".
  KvConfig to_kv(const std::string& prefix = "model.") const;
  static ModelConfig from_kv(const KvConfig& kv, const std::string& prefix = "model.");

  // visual tokens + max text tokens: the largest sequence any input can produce.
  std::size_t max_sequence_length() const;
};

struct SampleInput {
  image::ImageTensor image;
  text::MetadataFields fields;
  double target = 0.0;
};

// Pooled representations (n x dim, row-major) with their targets.
struct FeatureSet {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<double> targets;

  std::size_t size() const { return targets.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
};

struct EncodedBatch {
  std::vector<HiddenStates> hidden;
  std::vector<std::vector<double>> pooled;
};

// Runs preprocessing, pad_batch, the frozen backbone and masked mean pooling on
// one batch of samples.
EncodedBatch encode_batch(const Backbone& backbone, const ModelConfig& cfg,
                          std::span<const SampleInput> batch, bool keep_hidden = false);

// Streams `count` samples through encode_batch in chunks of `batch_size`;
// `load(i)` supplies sample i. Output order follows the index.
FeatureSet extract_features(const Backbone& backbone, const ModelConfig& cfg, std::size_t count,
                            const std::function<SampleInput(std::size_t)>& load, std::size_t batch_size = 64);

}  // namespace br
