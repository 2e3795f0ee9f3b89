#include "br/textprep.hpp"

#include <algorithm>

#include "br/error.hpp"

namespace br::text {
namespace {

constexpr std::string_view kPreamble =
    "<image> The average user rating for this product. Text metadata: ";

// Length of the well-formed UTF-8 sequence starting at s[i], or 1 if the lead
// byte is invalid or the sequence is truncated/malformed.
std::size_t utf8_step(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t min_cp = 0;
  if (b0 < 0x80) return 1;
  if ((b0 & 0xE0) == 0xC0) { len = 2; min_cp = 0x80; }
  else if ((b0 & 0xF0) == 0xE0) { len = 3; min_cp = 0x800; }
  else if ((b0 & 0xF8) == 0xF0) { len = 4; min_cp = 0x10000; }
  else return 1;
  if (i + len > s.size()) return 1;
  std::uint32_t cp = b0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 1;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 1;
  return len;
}

}  // namespace

void PromptConfig::validate() const {
  if (char_limit < 1) throw Error("invalid prompt config: char_limit must be >= 1");
  const std::size_t empty_tokens = tokenize(build_prompt({}, {1, SIZE_MAX}), {1, SIZE_MAX}).size();
  if (max_text_tokens < empty_tokens) {
    throw Error("invalid prompt config: max_text_tokens " + std::to_string(max_text_tokens) +
                " cannot hold the empty template (" + std::to_string(empty_tokens) + " tokens)");
  }
}

std::size_t TokenSequence::valid_length() const {
  return static_cast<std::size_t>(std::find(mask.begin(), mask.end(), 0) - mask.begin());
}

std::string truncate_field(std::string_view text, std::size_t limit) {
  std::size_t pos = 0;
  for (std::size_t n = 0; n < limit && pos < text.size(); ++n) pos += utf8_step(text, pos);
  return std::string(text.substr(0, pos));
}

std::size_t char_count(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size(); pos += utf8_step(text, pos)) ++n;
  return n;
}

std::string build_prompt(const MetadataFields& fields, const PromptConfig& cfg) {
  const std::size_t L = cfg.char_limit;
  std::string out(kPreamble);
  out += "Title: ";
  out += truncate_field(fields.title, L);
  out += ", Description: ";
  out += truncate_field(fields.description, L);
  out += ", Features: ";
  out += truncate_field(fields.features, L);
  out += ", Main Category: ";
  out += truncate_field(fields.main_category, L);
  return out;
}

TokenSequence tokenize(std::string_view prompt, const PromptConfig& cfg) {
  TokenSequence seq;
  seq.ids.reserve(std::min(prompt.size(), cfg.max_text_tokens));
  std::size_t i = 0;
  while (i < prompt.size() && seq.ids.size() < cfg.max_text_tokens) {
    if (prompt.compare(i, kImageTag.size(), kImageTag) == 0) {
      seq.ids.push_back(kImageId);
      i += kImageTag.size();
    } else {
      seq.ids.push_back(static_cast<unsigned char>(prompt[i]) + kByteOffset);
      ++i;
    }
  }
  seq.mask.assign(seq.ids.size(), 1);
  return seq;
}

BatchedTokens pad_batch(std::span<const TokenSequence> seqs) {
  if (seqs.empty()) throw Error("empty batch");
  BatchedTokens out;
  out.batch = seqs.size();
  for (const auto& s : seqs) {
    if (s.ids.size() != s.mask.size()) throw Error("token sequence ids/mask length mismatch");
    out.length = std::max(out.length, s.ids.size());
  }
  out.ids.assign(out.batch * out.length, kPadId);
  out.mask.assign(out.batch * out.length, 0);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    std::copy(seqs[b].ids.begin(), seqs[b].ids.end(), out.ids.begin() + b * out.length);
    std::copy(seqs[b].mask.begin(), seqs[b].mask.end(), out.mask.begin() + b * out.length);
  }
  return out;
}

std::size_t max_prompt_tokens(const PromptConfig& cfg) {
  const std::string slot(cfg.char_limit, 'x');
  return tokenize(build_prompt({slot, slot, slot, slot}, cfg), cfg).size();
}

}  // namespace br::text
