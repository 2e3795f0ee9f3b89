#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "br/textprep.hpp"

namespace br::data {

struct ImageRef {
  std::string variant;
  std::optional<std::string> url_hi;  // "hi_res"
  std::optional<std::string> url_lo;  // "large"
};

struct ItemRecord {
  std::string id;
  std::string main_category;
  std::string title;
  std::string description;
  std::string features;
  double average_rating = 0.0;
  std::uint64_t rating_number = 0;
  std::vector<ImageRef> images;
  std::optional<std::string> resolved_image;

  std::size_t line = 0;       // 1-based line in the source file
  std::string source_json;    // original line, re-emitted on output

  text::MetadataFields metadata() const { return {title, description, features, main_category}; }
};

struct Reject {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<ItemRecord> records;
  std::vector<Reject> rejects;
};

struct SamplingConfig {
  std::size_t k = 1000;
  std::uint64_t min_reviews = 10;
  std::size_t holdout_n = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

// One JSON object per line, Amazon Reviews'23 item-metadata field names. The
// id is taken from "id" or "parent_asin". List-valued description/features
// are joined with spaces; line breaks inside fields become spaces; a missing
// or null main_category becomes "Unknown". Unparsable or invalid lines are
// reported, never fatal.
IngestResult ingest_jsonl(const std::filesystem::path& path);
IngestResult ingest_jsonl_text(const std::string& text);

// First "MAIN" image with a URL: hi_res, else large.
std::optional<std::string> main_image(const ItemRecord& r);

// Keeps records with rating_number >= min_reviews and a "MAIN" image, and sets
// resolved_image to its hi_res URL, falling back to large. Order is preserved.
std::vector<ItemRecord> filter_items(std::vector<ItemRecord> records, const SamplingConfig& cfg);

// Per main_category: keep everything when the category holds <= 2k records,
// otherwise the k smallest and k largest by (rating_number, id). Output is
// sorted by (main_category, id).
std::vector<ItemRecord> stratified_sample(std::vector<ItemRecord> records, const SamplingConfig& cfg);

// Seeded Fisher-Yates shuffle; the first holdout_n records form the
// validation split. Returns (train, validation).
std::pair<std::vector<ItemRecord>, std::vector<ItemRecord>> split_holdout(std::vector<ItemRecord> records,
                                                                          const SamplingConfig& cfg);

// Source JSON of each record plus "resolved_image", one object per line.
std::string to_jsonl(const std::vector<ItemRecord>& records);

// "line,reason" rows (no header).
std::string rejects_csv_rows(const std::vector<Reject>& rejects);

}  // namespace br::data
