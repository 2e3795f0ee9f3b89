#include "br/datapipe.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "br/csv.hpp"
#include "br/error.hpp"
#include "br/rng.hpp"

namespace br::data {
namespace {

using nlohmann::json;

struct BadRecord {
  std::string reason;
};

std::string single_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string text_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return "";
  if (it->is_string()) return single_line(it->get<std::string>());
  if (it->is_array()) {
    std::string out;
    for (const auto& part : *it) {
      if (!part.is_string()) throw BadRecord{std::string("non-string entry in ") + key};
      if (!out.empty()) out += ' ';
      out += part.get<std::string>();
    }
    return single_line(out);
  }
  throw BadRecord{std::string(key) + " is not text"};
}

std::optional<std::string> optional_url(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw BadRecord{std::string("image ") + key + " is not a string"};
  std::string s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

ItemRecord parse_record(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error&) {
    throw BadRecord{"unparsable JSON"};
  }
  if (!obj.is_object()) throw BadRecord{"line is not a JSON object"};

  ItemRecord r;
  for (const char* key : {"id", "parent_asin"}) {
    const auto it = obj.find(key);
    if (it != obj.end() && it->is_string() && !it->get<std::string>().empty()) {
      r.id = it->get<std::string>();
      break;
    }
  }
  if (r.id.empty()) throw BadRecord{"missing id"};

  const auto cat = obj.find("main_category");
  if (cat == obj.end() || cat->is_null()) {
    r.main_category = "Unknown";
  } else if (cat->is_string()) {
    r.main_category = single_line(cat->get<std::string>());
    if (r.main_category.empty()) r.main_category = "Unknown";
  } else {
    throw BadRecord{"main_category is not a string"};
  }
  r.title = text_field(obj, "title");
  r.description = text_field(obj, "description");
  r.features = text_field(obj, "features");

  const auto avg = obj.find("average_rating");
  if (avg == obj.end() || !avg->is_number()) throw BadRecord{"missing average_rating"};
  r.average_rating = avg->get<double>();
  if (!(r.average_rating >= 1.0 && r.average_rating <= 5.0)) throw BadRecord{"average_rating outside [1, 5]"};

  const auto num = obj.find("rating_number");
  if (num != obj.end() && !num->is_null()) {
    if (num->is_number_unsigned()) {
      r.rating_number = num->get<std::uint64_t>();
    } else if (num->is_number_integer()) {
      throw BadRecord{"negative rating_number"};
    } else {
      throw BadRecord{"rating_number is not an integer"};
    }
  }

  const auto imgs = obj.find("images");
  if (imgs != obj.end() && !imgs->is_null()) {
    if (!imgs->is_array()) throw BadRecord{"images is not a list"};
    for (const auto& img : *imgs) {
      if (!img.is_object()) throw BadRecord{"image entry is not an object"};
      ImageRef ref;
      const auto v = img.find("variant");
      if (v != img.end() && v->is_string()) ref.variant = v->get<std::string>();
      ref.url_hi = optional_url(img, "hi_res");
      ref.url_lo = optional_url(img, "large");
      r.images.push_back(std::move(ref));
    }
  }

  const auto resolved = obj.find("resolved_image");
  if (resolved != obj.end() && resolved->is_string()) r.resolved_image = resolved->get<std::string>();
  r.source_json = line;
  return r;
}

bool id_less(const ItemRecord& a, const ItemRecord& b) {
  if (a.rating_number != b.rating_number) return a.rating_number < b.rating_number;
  return a.id < b.id;
}

}  // namespace

void SamplingConfig::validate() const {
  if (k < 1) throw Error("invalid sampling config: k must be >= 1");
  if (holdout_n < 1) throw Error("invalid sampling config: holdout must be >= 1");
}

IngestResult ingest_jsonl_text(const std::string& text) {
  IngestResult out;
  std::unordered_set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      ItemRecord r = parse_record(line);
      r.line = lineno;
      if (!seen.insert(r.id).second) throw BadRecord{"duplicate id " + r.id};
      out.records.push_back(std::move(r));
    } catch (const BadRecord& bad) {
      out.rejects.push_back({lineno, bad.reason});
    } catch (const json::exception& e) {
      out.rejects.push_back({lineno, std::string("invalid field: ") + e.what()});
    }
  }
  return out;
}

IngestResult ingest_jsonl(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("input not found: " + path.string());
  return ingest_jsonl_text(read_text_file(path));
}

std::optional<std::string> main_image(const ItemRecord& r) {
  const auto main = std::find_if(r.images.begin(), r.images.end(), [](const ImageRef& img) {
    return img.variant == "MAIN" && (img.url_hi || img.url_lo);
  });
  if (main == r.images.end()) return std::nullopt;
  return main->url_hi ? *main->url_hi : *main->url_lo;
}

std::vector<ItemRecord> filter_items(std::vector<ItemRecord> records, const SamplingConfig& cfg) {
  std::vector<ItemRecord> kept;
  for (auto& r : records) {
    if (r.rating_number < cfg.min_reviews) continue;
    r.resolved_image = main_image(r);
    if (!r.resolved_image) continue;
    kept.push_back(std::move(r));
  }
  return kept;
}

std::vector<ItemRecord> stratified_sample(std::vector<ItemRecord> records, const SamplingConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::vector<ItemRecord>> groups;
  for (auto& r : records) groups[r.main_category].push_back(std::move(r));

  std::vector<ItemRecord> out;
  for (auto& [category, items] : groups) {
    std::vector<ItemRecord> chosen;
    if (items.size() <= 2 * cfg.k) {
      chosen = std::move(items);
    } else {
      // Strict total order, so the bottom-k and top-k slices never overlap.
      std::sort(items.begin(), items.end(), id_less);
      std::move(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(cfg.k), std::back_inserter(chosen));
      std::move(items.end() - static_cast<std::ptrdiff_t>(cfg.k), items.end(), std::back_inserter(chosen));
    }
    std::sort(chosen.begin(), chosen.end(), [](const ItemRecord& a, const ItemRecord& b) { return a.id < b.id; });
    std::move(chosen.begin(), chosen.end(), std::back_inserter(out));
  }
  return out;
}

std::pair<std::vector<ItemRecord>, std::vector<ItemRecord>> split_holdout(std::vector<ItemRecord> records,
                                                                          const SamplingConfig& cfg) {
  cfg.validate();
  if (records.size() <= cfg.holdout_n) {
    throw Error("too few records for holdout: have " + std::to_string(records.size()) + ", holdout is " +
                std::to_string(cfg.holdout_n));
  }
  SplitMix64 rng(cfg.seed);
  shuffle(std::span<ItemRecord>(records), rng);
  std::vector<ItemRecord> val(std::make_move_iterator(records.begin()),
                              std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(cfg.holdout_n)));
  std::vector<ItemRecord> train(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(cfg.holdout_n)),
                                std::make_move_iterator(records.end()));
  return {std::move(train), std::move(val)};
}

std::string to_jsonl(const std::vector<ItemRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json obj = json::parse(r.source_json);
    if (r.resolved_image) {
      obj["resolved_image"] = *r.resolved_image;
    } else {
      obj["resolved_image"] = nullptr;
    }
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string rejects_csv_rows(const std::vector<Reject>& rejects) {
  std::string out;
  for (const auto& r : rejects) out += csv_line({std::to_string(r.line), r.reason});
  return out;
}

}  // namespace br::data
