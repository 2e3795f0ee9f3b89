#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "br/kvconfig.hpp"

namespace br::eff {

struct ResourceProfile {
  double params = 0.0;  // absolute count
  double flops = 0.0;   // per forward pass
};

struct CESConfig {
  double p_tgt = 1e9;
  double f_tgt = 2e10;
  double bonus_slope = 0.05;
  double bonus_cap = 1.10;
  double penalty_slope = 2.0;

  void validate() const;
  static CESConfig from_kv(const KvConfig& kv);
};

// C = sqrt(params / p_tgt) * sqrt(flops / f_tgt)
double cost_C(const ResourceProfile& profile, const CESConfig& cfg = {});

// min(1 + bonus_slope * ln(1/C), bonus_cap)   for C <= 1
// 1 / (1 + penalty_slope * ln C)              for C > 1
double efficiency_E(double C, const CESConfig& cfg = {});

// max(0, plcc) * E(C(profile))
double ces(double plcc, const ResourceProfile& profile, const CESConfig& cfg = {});

struct CesReport {
  double plcc = 0.0;
  double params = 0.0;
  double flops = 0.0;
  double C = 0.0;
  double E = 0.0;
  double ces = 0.0;

  static std::string csv_header();  // plcc,params,flops,C,E,ces
  std::string csv_row() const;
};

CesReport ces_report(double plcc, const ResourceProfile& profile, const CESConfig& cfg = {});

enum class FlopConvention { mac, two_flops_per_mac };

// Transformer stack description used for closed-form parameter and FLOP counts.
struct ArchSpec {
  std::string name;

  struct Vision {
    std::size_t layers = 12;
    std::size_t width = 768;
    std::size_t heads = 12;
    std::size_t patch = 16;
    std::size_t mlp_hidden = 3072;
    std::size_t native_resolution = 512;  // sizes the position-embedding table
    bool bias = true;
  } vision;

  struct Connector {
    std::size_t shuffle = 4;
    bool bias = false;
  } connector;  // Linear(vision.width * shuffle^2 -> decoder.width)

  struct Decoder {
    std::size_t layers = 30;
    std::size_t width = 576;
    std::size_t heads = 9;
    std::size_t kv_heads = 3;
    std::size_t mlp_hidden = 1536;
    std::size_t vocab = 49280;
    bool gated_mlp = true;
    bool bias = false;
  } decoder;

  FlopConvention convention = FlopConvention::mac;
  // Whether the QK^T and attention-times-V products (2 * T^2 * width MACs per
  // layer) are counted alongside the projection and MLP matmuls.
  bool count_attention_scores = true;
  // Average characters per token of the checkpoint's tokenizer on metadata
  // text; maps a character budget to a text token count.
  double text_chars_per_token = 3.0;

  void validate() const;
  static ArchSpec from_kv(const KvConfig& kv);
  static ArchSpec load(const std::filesystem::path& path);
};

struct ParamCounts {
  std::uint64_t vision = 0;
  std::uint64_t connector = 0;
  std::uint64_t decoder = 0;
  std::uint64_t head = 0;
  std::uint64_t total = 0;
  std::uint64_t trainable = 0;  // decoder + head
};

// d*(d/2) + d/2 + (d/2)*1 + 1
std::uint64_t head_param_count(std::size_t d);

ParamCounts param_count(const ArchSpec& spec);

struct FlopBreakdown {
  double vision = 0.0;
  double connector = 0.0;
  double decoder = 0.0;
  double head = 0.0;
  double total = 0.0;
};

// Decoder-side visual token count at an input resolution: (R/p)^2 / r^2.
std::size_t visual_tokens_for_resolution(const ArchSpec& spec, std::size_t resolution);

// Text tokens of the prompt when every field reaches `char_limit` characters:
// ceil((template characters + 4 * char_limit) / text_chars_per_token).
std::size_t text_tokens_for_budget(const ArchSpec& spec, std::size_t char_limit);

// Forward-pass FLOPs for `visual_tokens` decoder-side image tokens (the vision
// encoder runs over visual_tokens * shuffle^2 patches) and `text_tokens`.
FlopBreakdown flop_estimate(const ArchSpec& spec, std::size_t visual_tokens, std::size_t text_tokens);

// Worst-case compute at a resolution and per-field character budget.
FlopBreakdown max_flops(const ArchSpec& spec, std::size_t resolution, std::size_t char_limit);

}  // namespace br::eff
