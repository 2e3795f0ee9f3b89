#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace br::text {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kImageId = 1;
inline constexpr std::int32_t kByteOffset = 2;
inline constexpr std::int32_t kVocabSize = 256 + kByteOffset;
inline constexpr std::string_view kImageTag = "<image>";

struct MetadataFields {
  std::string title;
  std::string description;
  std::string features;
  std::string main_category;
};

struct PromptConfig {
  std::size_t char_limit = 100;
  std::size_t max_text_tokens = 1024;

  // Throws br::Error when the budget cannot hold the empty template.
  void validate() const;
};

struct TokenSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return ids.size(); }
  // Number of leading mask==1 positions.
  std::size_t valid_length() const;
};

struct BatchedTokens {
  std::size_t batch = 0;
  std::size_t length = 0;            // T, the longest row
  std::vector<std::int32_t> ids;     // batch x length, row-major
  std::vector<std::uint8_t> mask;    // batch x length, row-major

  std::span<const std::int32_t> row_ids(std::size_t b) const {
    return {ids.data() + b * length, length};
  }
  std::span<const std::uint8_t> row_mask(std::size_t b) const {
    return {mask.data() + b * length, length};
  }
};

// First min(len, limit) Unicode scalar values of a UTF-8 string. Bytes that do
// not start a well-formed sequence count as one character each, so the cut
// never lands inside a valid multi-byte character.
std::string truncate_field(std::string_view text, std::size_t limit);

// Number of Unicode scalar values under the same counting rule.
std::size_t char_count(std::string_view text);

// <image> The average user rating for this product. Text metadata: Title: {t},
// Description: {d}, Features: {f}, Main Category: {c}
std::string build_prompt(const MetadataFields& fields, const PromptConfig& cfg);

// Byte-level encoding (id = byte + 2), with each literal "<image>" replaced by
// kImageId, hard-truncated to cfg.max_text_tokens.
TokenSequence tokenize(std::string_view prompt, const PromptConfig& cfg);

// Right-pads every row with kPadId / mask 0 to the longest row.
BatchedTokens pad_batch(std::span<const TokenSequence> seqs);

// Token count of the prompt for fields that fill every slot to exactly
// `char_limit` ASCII characters.
std::size_t max_prompt_tokens(const PromptConfig& cfg);

}  // namespace br::text
