#include "br/effscore.hpp"

#include <cmath>

#include "br/csv.hpp"
#include "br/error.hpp"
#include "br/textprep.hpp"

namespace br::eff {
namespace {

double sq(std::size_t v) { return static_cast<double>(v) * static_cast<double>(v); }

std::size_t template_chars() {
  const std::string empty = text::build_prompt({}, {1, 1});
  return text::char_count(empty) - text::kImageTag.size();
}

}  // namespace

void CESConfig::validate() const {
  if (!(p_tgt > 0 && f_tgt > 0 && bonus_slope > 0 && penalty_slope > 0 && bonus_cap >= 1.0)) {
    throw Error("invalid CES config");
  }
}

CESConfig CESConfig::from_kv(const KvConfig& kv) {
  CESConfig c;
  c.p_tgt = kv.get_double("ces.p_tgt", c.p_tgt);
  c.f_tgt = kv.get_double("ces.f_tgt", c.f_tgt);
  c.bonus_slope = kv.get_double("ces.bonus_slope", c.bonus_slope);
  c.bonus_cap = kv.get_double("ces.bonus_cap", c.bonus_cap);
  c.penalty_slope = kv.get_double("ces.penalty_slope", c.penalty_slope);
  c.validate();
  return c;
}

double cost_C(const ResourceProfile& profile, const CESConfig& cfg) {
  if (!(profile.params > 0 && profile.flops > 0)) throw Error("resource profile must be positive");
  return std::sqrt(profile.params / cfg.p_tgt) * std::sqrt(profile.flops / cfg.f_tgt);
}

double efficiency_E(double C, const CESConfig& cfg) {
  if (!(C > 0) || !std::isfinite(C)) throw Error("resource cost must be positive and finite");
  if (C <= 1.0) return std::min(1.0 + cfg.bonus_slope * std::log(1.0 / C), cfg.bonus_cap);
  return 1.0 / (1.0 + cfg.penalty_slope * std::log(C));
}

double ces(double plcc, const ResourceProfile& profile, const CESConfig& cfg) {
  return ces_report(plcc, profile, cfg).ces;
}

std::string CesReport::csv_header() { return "plcc,params,flops,C,E,ces\n"; }

std::string CesReport::csv_row() const {
  return csv_line({format_double(plcc), format_double(params), format_double(flops), format_double(C),
                   format_double(E), format_double(ces)});
}

CesReport ces_report(double plcc, const ResourceProfile& profile, const CESConfig& cfg) {
  if (!(plcc >= -1.0 && plcc <= 1.0)) throw Error("plcc must lie in [-1, 1]");
  CesReport r;
  r.plcc = plcc;
  r.params = profile.params;
  r.flops = profile.flops;
  r.C = cost_C(profile, cfg);
  r.E = efficiency_E(r.C, cfg);
  r.ces = std::max(0.0, plcc) * r.E;
  return r;
}

void ArchSpec::validate() const {
  const auto fail = [this](const std::string& why) {
    throw Error("inconsistent arch spec '" + name + "': " + why);
  };
  if (vision.patch == 0 || vision.width == 0) fail("vision patch and width must be positive");
  if (vision.layers > 0 && (vision.heads == 0 || vision.width % vision.heads != 0)) {
    fail("vision width not divisible by heads");
  }
  if (vision.native_resolution % vision.patch != 0) fail("native resolution not divisible by patch");
  if (connector.shuffle == 0) fail("shuffle factor must be positive");
  if ((vision.native_resolution / vision.patch) % connector.shuffle != 0) {
    fail("native patch grid not divisible by shuffle factor");
  }
  if (decoder.width == 0 || decoder.width % 2 != 0) fail("decoder width must be even and positive");
  if (decoder.layers > 0) {
    if (decoder.heads == 0 || decoder.width % decoder.heads != 0) fail("decoder width not divisible by heads");
    if (decoder.kv_heads == 0 || decoder.heads % decoder.kv_heads != 0) fail("heads not divisible by kv_heads");
  }
  if (!(text_chars_per_token > 0)) fail("text_chars_per_token must be positive");
}

ArchSpec ArchSpec::from_kv(const KvConfig& kv) {
  ArchSpec s;
  s.name = kv.get_string("name", "unnamed");
  auto& v = s.vision;
  v.layers = kv.get_size("vision.layers", v.layers);
  v.width = kv.get_size("vision.width", v.width);
  v.heads = kv.get_size("vision.heads", v.heads);
  v.patch = kv.get_size("vision.patch", v.patch);
  v.native_resolution = kv.get_size("vision.native_resolution", v.native_resolution);
  v.bias = kv.get_bool("vision.bias", v.bias);
  if (kv.has("vision.mlp_ratio") && !kv.has("vision.mlp_hidden")) {
    v.mlp_hidden = static_cast<std::size_t>(std::llround(kv.get_double("vision.mlp_ratio", 4.0) * static_cast<double>(v.width)));
  }
  v.mlp_hidden = kv.get_size("vision.mlp_hidden", v.mlp_hidden);
  s.connector.shuffle = kv.get_size("connector.shuffle", s.connector.shuffle);
  s.connector.bias = kv.get_bool("connector.bias", s.connector.bias);
  auto& d = s.decoder;
  d.layers = kv.get_size("decoder.layers", d.layers);
  d.width = kv.get_size("decoder.width", d.width);
  d.heads = kv.get_size("decoder.heads", d.heads);
  // Without an explicit kv_heads the stack uses plain multi-head attention.
  d.kv_heads = kv.get_size("decoder.kv_heads", kv.has("decoder.heads") ? d.heads : d.kv_heads);
  if (kv.has("decoder.mlp_ratio") && !kv.has("decoder.mlp_hidden")) {
    d.mlp_hidden = static_cast<std::size_t>(std::llround(kv.get_double("decoder.mlp_ratio", 4.0) * static_cast<double>(d.width)));
  }
  d.mlp_hidden = kv.get_size("decoder.mlp_hidden", d.mlp_hidden);
  d.vocab = kv.get_size("decoder.vocab", d.vocab);
  d.gated_mlp = kv.get_bool("decoder.gated_mlp", d.gated_mlp);
  d.bias = kv.get_bool("decoder.bias", d.bias);
  const std::string conv = kv.get_string("flops.convention", "mac");
  if (conv == "mac") {
    s.convention = FlopConvention::mac;
  } else if (conv == "two_flops_per_mac") {
    s.convention = FlopConvention::two_flops_per_mac;
  } else {
    throw Error("flops.convention must be 'mac' or 'two_flops_per_mac', got '" + conv + "'");
  }
  s.count_attention_scores = kv.get_bool("flops.count_attention_scores", s.count_attention_scores);
  s.text_chars_per_token = kv.get_double("flops.text_chars_per_token", s.text_chars_per_token);
  s.validate();
  return s;
}

ArchSpec ArchSpec::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("arch spec not found: " + path.string());
  return from_kv(KvConfig::load(path));
}

std::uint64_t head_param_count(std::size_t d) {
  const std::uint64_t h = d / 2;
  return d * h + h + h * 1 + 1;
}

ParamCounts param_count(const ArchSpec& spec) {
  spec.validate();
  ParamCounts c;
  const auto& v = spec.vision;
  const std::uint64_t w = v.width;
  const std::uint64_t grid = v.native_resolution / v.patch;
  // conv patch embedding (+bias) and learned position table
  c.vision = 3 * v.patch * v.patch * w + (v.bias ? w : 0) + grid * grid * w;
  if (v.layers > 0) {
    const std::uint64_t attn = 4 * w * w + (v.bias ? 4 * w : 0);
    const std::uint64_t mlp = 2 * w * v.mlp_hidden + (v.bias ? v.mlp_hidden + w : 0);
    const std::uint64_t norms = 2 * 2 * w;  // two LayerNorms with scale and shift
    c.vision += v.layers * (attn + mlp + norms) + 2 * w;  // + post-LayerNorm
  }

  const auto& d = spec.decoder;
  const std::uint64_t dm = d.width;
  const std::uint64_t in_dim = w * spec.connector.shuffle * spec.connector.shuffle;
  c.connector = in_dim * dm + (spec.connector.bias ? dm : 0);

  c.decoder = d.vocab * dm;  // tied input/output embedding, counted once
  if (d.layers > 0) {
    const std::uint64_t kv_dim = dm / d.heads * d.kv_heads;
    const std::uint64_t attn = 2 * dm * dm + 2 * dm * kv_dim + (d.bias ? 2 * dm + 2 * kv_dim : 0);
    const std::uint64_t mlp = (d.gated_mlp ? 3 : 2) * dm * d.mlp_hidden +
                              (d.bias ? (d.gated_mlp ? 2 : 1) * d.mlp_hidden + dm : 0);
    const std::uint64_t norms = 2 * dm;  // two RMSNorm scales
    c.decoder += d.layers * (attn + mlp + norms) + dm;  // + final norm
  }

  c.head = head_param_count(dm);
  c.total = c.vision + c.connector + c.decoder + c.head;
  c.trainable = c.decoder + c.head;
  return c;
}

std::size_t visual_tokens_for_resolution(const ArchSpec& spec, std::size_t resolution) {
  if (resolution == 0 || resolution % spec.vision.patch != 0) throw Error("resolution/patch mismatch");
  const std::size_t grid = resolution / spec.vision.patch;
  if (grid % spec.connector.shuffle != 0) throw Error("shuffle factor mismatch");
  const std::size_t g = grid / spec.connector.shuffle;
  return g * g;
}

std::size_t text_tokens_for_budget(const ArchSpec& spec, std::size_t char_limit) {
  const double chars = static_cast<double>(template_chars() + 4 * char_limit);
  return static_cast<std::size_t>(std::ceil(chars / spec.text_chars_per_token));
}

FlopBreakdown flop_estimate(const ArchSpec& spec, std::size_t visual_tokens, std::size_t text_tokens) {
  spec.validate();
  if (visual_tokens == 0 || text_tokens == 0) throw Error("token counts must be positive");
  const auto& v = spec.vision;
  const auto& d = spec.decoder;
  const double r2 = sq(spec.connector.shuffle);
  const double n_patch = static_cast<double>(visual_tokens) * r2;
  const double w = static_cast<double>(v.width);
  const double dm = static_cast<double>(d.width);

  FlopBreakdown f;
  // All terms below are multiply-accumulates.
  f.vision = n_patch * 3.0 * sq(v.patch) * w;
  double per_layer = n_patch * (4.0 * w * w + 2.0 * w * static_cast<double>(v.mlp_hidden));
  if (spec.count_attention_scores) per_layer += 2.0 * n_patch * n_patch * w;
  f.vision += static_cast<double>(v.layers) * per_layer;

  f.connector = static_cast<double>(visual_tokens) * (w * r2) * dm;

  const double T = static_cast<double>(visual_tokens + text_tokens);
  if (d.layers > 0) {
    const double kv_dim = dm / static_cast<double>(d.heads) * static_cast<double>(d.kv_heads);
    const double proj = 2.0 * dm * dm + 2.0 * dm * kv_dim;
    const double mlp = (d.gated_mlp ? 3.0 : 2.0) * dm * static_cast<double>(d.mlp_hidden);
    double dec_layer = T * (proj + mlp);
    if (spec.count_attention_scores) dec_layer += 2.0 * T * T * dm;
    f.decoder = static_cast<double>(d.layers) * dec_layer;
  }

  f.head = dm * (dm / 2.0) + dm / 2.0;

  const double k = spec.convention == FlopConvention::two_flops_per_mac ? 2.0 : 1.0;
  f.vision *= k;
  f.connector *= k;
  f.decoder *= k;
  f.head *= k;
  f.total = f.vision + f.connector + f.decoder + f.head;
  return f;
}

FlopBreakdown max_flops(const ArchSpec& spec, std::size_t resolution, std::size_t char_limit) {
  return flop_estimate(spec, visual_tokens_for_resolution(spec, resolution), text_tokens_for_budget(spec, char_limit));
}

}  // namespace br::eff
