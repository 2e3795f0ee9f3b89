#include "br/pipeline.hpp"

#include <charconv>
#include <sstream>

#include "br/csv.hpp"
#include "br/error.hpp"
#include "br/reghead.hpp"

namespace br {
namespace {

std::string triple(const std::array<float, 3>& v) {
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

std::array<float, 3> parse_triple(const std::string& key, const std::string& s) {
  std::array<float, 3> out{};
  std::stringstream ss(s);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw Error("config key '" + key + "' needs three comma-separated values");
    float v = 0.0f;
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc() || res.ptr != part.data() + part.size()) {
      throw Error("config key '" + key + "': '" + part + "' is not a number");
    }
    out[i++] = v;
  }
  if (i != 3) throw Error("config key '" + key + "' needs three comma-separated values");
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  prompt.validate();
  image.validate();
  backbone.validate();
  if (backbone.visual_dim != image.visual_token_dim()) {
    throw Error("backbone visual_dim " + std::to_string(backbone.visual_dim) +
                " does not match image token dim " + std::to_string(image.visual_token_dim()));
  }
  if (backbone.vocab_size != static_cast<std::size_t>(text::kVocabSize)) {
    throw Error("backbone vocab_size must match the byte tokenizer (258)");
  }
}

KvConfig ModelConfig::to_kv(const std::string& prefix) const {
  KvConfig kv;
  kv.set(prefix + "prompt.char_limit", std::to_string(prompt.char_limit));
  kv.set(prefix + "prompt.max_text_tokens", std::to_string(prompt.max_text_tokens));
  kv.set(prefix + "image.resolution", std::to_string(image.resolution));
  kv.set(prefix + "image.patch", std::to_string(image.patch));
  kv.set(prefix + "image.shuffle", std::to_string(image.shuffle));
  kv.set(prefix + "image.mean", triple(image.mean));
  kv.set(prefix + "image.std", triple(image.std));
  kv.set(prefix + "backbone.d_model", std::to_string(backbone.d_model));
  kv.set(prefix + "backbone.n_mix_layers", std::to_string(backbone.n_mix_layers));
  kv.set(prefix + "backbone.seed", std::to_string(backbone.seed));
  return kv;
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv, const std::string& prefix) {
  ModelConfig m;
  m.prompt.char_limit = kv.get_size(prefix + "prompt.char_limit", m.prompt.char_limit);
  m.prompt.max_text_tokens = kv.get_size(prefix + "prompt.max_text_tokens", m.prompt.max_text_tokens);
  m.image.resolution = kv.get_size(prefix + "image.resolution", m.image.resolution);
  m.image.patch = kv.get_size(prefix + "image.patch", m.image.patch);
  m.image.shuffle = kv.get_size(prefix + "image.shuffle", m.image.shuffle);
  if (const auto v = kv.find(prefix + "image.mean")) m.image.mean = parse_triple(prefix + "image.mean", *v);
  if (const auto v = kv.find(prefix + "image.std")) m.image.std = parse_triple(prefix + "image.std", *v);
  m.backbone.d_model = kv.get_size(prefix + "backbone.d_model", m.backbone.d_model);
  m.backbone.n_mix_layers = kv.get_size(prefix + "backbone.n_mix_layers", m.backbone.n_mix_layers);
  m.backbone.seed = kv.get_u64(prefix + "backbone.seed", m.backbone.seed);
  m.backbone.visual_dim = m.image.visual_token_dim();
  m.backbone.vocab_size = text::kVocabSize;
  m.validate();
  return m;
}

std::size_t ModelConfig::max_sequence_length() const {
  return image.visual_token_count() + prompt.max_text_tokens;
}

EncodedBatch encode_batch(const Backbone& backbone, const ModelConfig& cfg,
                          std::span<const SampleInput> batch, bool keep_hidden) {
  std::vector<text::TokenSequence> seqs;
  seqs.reserve(batch.size());
  for (const auto& s : batch) seqs.push_back(text::tokenize(text::build_prompt(s.fields, cfg.prompt), cfg.prompt));
  const text::BatchedTokens tokens = text::pad_batch(seqs);

  EncodedBatch out;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const image::VisualTokens visual = image::preprocess(batch[b].image, cfg.image);
    HiddenStates hs = backbone.encode(visual, tokens.row_ids(b), tokens.row_mask(b));
    out.pooled.push_back(masked_mean_pool(hs));
    if (keep_hidden) out.hidden.push_back(std::move(hs));
  }
  return out;
}

FeatureSet extract_features(const Backbone& backbone, const ModelConfig& cfg, std::size_t count,
                            const std::function<SampleInput(std::size_t)>& load, std::size_t batch_size) {
  if (batch_size == 0) throw Error("batch size must be positive");
  FeatureSet fs;
  fs.dim = backbone.config().d_model;
  fs.features.reserve(count * fs.dim);
  fs.targets.reserve(count);
  std::vector<SampleInput> chunk;
  for (std::size_t start = 0; start < count; start += batch_size) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(count, start + batch_size); ++i) chunk.push_back(load(i));
    const EncodedBatch enc = encode_batch(backbone, cfg, chunk);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      fs.features.insert(fs.features.end(), enc.pooled[b].begin(), enc.pooled[b].end());
      fs.targets.push_back(chunk[b].target);
    }
  }
  return fs;
}

}  // namespace br
