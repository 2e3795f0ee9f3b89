#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "br/datapipe.hpp"
#include "br/error.hpp"
#include "fixtures.hpp"

using namespace br::data;

namespace {

ItemRecord rec(const std::string& id, const std::string& cat, std::uint64_t n, bool main = true, bool hi = true) {
  ItemRecord r;
  r.id = id;
  r.main_category = cat;
  r.average_rating = 4.0;
  r.rating_number = n;
  ImageRef img;
  img.variant = main ? "MAIN" : "PT01";
  if (hi) img.url_hi = "hi/" + id;
  img.url_lo = "lo/" + id;
  r.images.push_back(img);
  return r;
}

std::vector<std::string> ids(const std::vector<ItemRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.id);
  return out;
}

SamplingConfig sampling(std::size_t k, std::size_t holdout = 1, std::uint64_t seed = 0) {
  SamplingConfig c;
  c.k = k;
  c.holdout_n = holdout;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("filters") {
  SamplingConfig cfg;
  const auto out = filter_items({rec("a", "X", 9), rec("b", "X", 10, false), rec("c", "X", 10, true, false),
                                 rec("d", "X", 50)},
                                cfg);
  CHECK(ids(out) == std::vector<std::string>{"c", "d"});
  CHECK(out[0].resolved_image == "lo/c");
  CHECK(out[1].resolved_image == "hi/d");
}

TEST_CASE("stratified sampling") {
  const auto small = stratified_sample({rec("a", "X", 1), rec("b", "X", 2), rec("c", "X", 3)}, sampling(2));
  CHECK(small.size() == 3);

  const auto five = stratified_sample(
      {rec("a", "X", 50), rec("b", "X", 10), rec("c", "X", 30), rec("d", "X", 40), rec("e", "X", 20)}, sampling(2));
  CHECK(ids(five) == std::vector<std::string>{"a", "b", "d", "e"});

  CHECK(stratified_sample({}, sampling(2)).empty());
}

TEST_CASE("sampling ties are broken by id without duplicates") {
  std::vector<ItemRecord> rs;
  for (int i = 0; i < 7; ++i) rs.push_back(rec("id" + std::to_string(i), "X", 5));
  const auto out = stratified_sample(rs, sampling(3));
  CHECK(ids(out) == std::vector<std::string>{"id0", "id1", "id2", "id4", "id5", "id6"});
}

TEST_CASE("sampling output is ordered by category then id") {
  const auto out = stratified_sample({rec("z", "B", 1), rec("a", "B", 2), rec("m", "A", 3)}, sampling(5));
  CHECK(ids(out) == std::vector<std::string>{"m", "a", "z"});
}

TEST_CASE("holdout split") {
  std::vector<ItemRecord> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(rec("r" + std::to_string(i), "X", 10));
  auto [tr, va] = split_holdout(rs, sampling(1, 3, 4));
  CHECK(tr.size() == 7);
  CHECK(va.size() == 3);
  std::set<std::string> all;
  for (const auto& r : tr) all.insert(r.id);
  for (const auto& r : va) all.insert(r.id);
  CHECK(all.size() == 10);

  auto [tr2, va2] = split_holdout(rs, sampling(1, 3, 4));
  CHECK(ids(va) == ids(va2));

  CHECK_THROWS_AS(split_holdout(rs, sampling(1, 10, 4)), br::Error);
}

TEST_CASE("different seeds give different validation sets") {
  std::vector<ItemRecord> rs;
  for (int i = 0; i < 1000; ++i) rs.push_back(rec("r" + std::to_string(i), "X", 10));
  auto a = split_holdout(rs, sampling(1, 100, 1)).second;
  auto b = split_holdout(rs, sampling(1, 100, 2)).second;
  auto sa = ids(a), sb = ids(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  CHECK(sa != sb);
}

TEST_CASE("ingest") {
  CHECK(ingest_jsonl_text("").records.empty());
  CHECK(ingest_jsonl_text("").rejects.empty());

  fixtures::Item it;
  it.id = "A1";
  it.title = "t";
  const std::string good = fixtures::item_json(it, "x.ppm");
  auto one = ingest_jsonl_text(good + "\n");
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0].id == "A1");
  CHECK(one.records[0].line == 1);

  auto mixed = ingest_jsonl_text(good + "\n{not json\n");
  CHECK(mixed.records.size() == 1);
  REQUIRE(mixed.rejects.size() == 1);
  CHECK(mixed.rejects[0].line == 2);
}

TEST_CASE("ingest normalizes Amazon-style fields") {
  const std::string line =
      R"({"parent_asin":"P9","main_category":null,"title":"two\nlines","average_rating":4.5,"rating_number":null,)"
      R"("features":["a","b"],"description":[],"images":[{"variant":"MAIN","hi_res":null,"large":"l.jpg"}],"extra":1})";
  auto res = ingest_jsonl_text(line + "\n");
  REQUIRE(res.records.size() == 1);
  const auto& r = res.records[0];
  CHECK(r.id == "P9");
  CHECK(r.main_category == "Unknown");
  CHECK(r.title == "two lines");
  CHECK(r.features == "a b");
  CHECK(r.description.empty());
  CHECK(r.rating_number == 0);
  CHECK_FALSE(r.images[0].url_hi.has_value());
}

TEST_CASE("ingest rejects invalid records") {
  const std::string text = R"({"parent_asin":"a","average_rating":7})" "\n"
                           R"({"parent_asin":"b"})" "\n"
                           R"({"average_rating":3})" "\n"
                           R"({"parent_asin":"c","average_rating":3})" "\n"
                           R"({"parent_asin":"c","average_rating":3})" "\n"
                           "\n"
                           "[1,2]\n";
  auto res = ingest_jsonl_text(text);
  CHECK(res.records.size() == 1);
  std::vector<std::size_t> lines;
  for (const auto& r : res.rejects) lines.push_back(r.line);
  CHECK(lines == std::vector<std::size_t>{1, 2, 3, 5, 7});
}

TEST_CASE("jsonl output carries the resolved image") {
  fixtures::Item it;
  it.id = "Q";
  it.rating_number = 20;
  auto res = ingest_jsonl_text(fixtures::item_json(it, "img/q.ppm") + "\n");
  auto kept = filter_items(res.records, SamplingConfig{});
  const auto out = to_jsonl(kept);
  const auto j = nlohmann::json::parse(out.substr(0, out.find('\n')));
  CHECK(j["resolved_image"] == "img/q.ppm");
  CHECK(j["parent_asin"] == "Q");
  auto again = ingest_jsonl_text(out);
  REQUIRE(again.records.size() == 1);
  CHECK(again.records[0].resolved_image == "img/q.ppm");
}

TEST_CASE("rejects csv rows escape commas") {
  const auto rows = rejects_csv_rows({{3, "bad, very bad"}});
  CHECK(rows == "3,\"bad, very bad\"\n");
}

TEST_CASE("catalog pipeline sizes and filters") {
  auto res = ingest_jsonl_text(fixtures::catalog_jsonl(2000, 4, 1));
  CHECK(res.rejects.empty());
  auto cfg = sampling(100);
  auto kept = filter_items(res.records, cfg);
  std::map<std::string, std::size_t> per_cat;
  for (const auto& r : kept) ++per_cat[r.main_category];
  auto sampled = stratified_sample(kept, cfg);
  std::map<std::string, std::size_t> out_cat;
  for (const auto& r : sampled) {
    ++out_cat[r.main_category];
    CHECK(r.rating_number >= 10);
    CHECK(r.resolved_image.has_value());
  }
  for (const auto& [c, n] : per_cat) CHECK(out_cat[c] == std::min<std::size_t>(n, 200));
}
