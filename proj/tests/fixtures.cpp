#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "br/rng.hpp"

namespace fixtures {

using nlohmann::json;

double learnable_rating(double brightness, bool flag) {
  return std::clamp(1.0 + 2.5 * brightness + 1.5 * (flag ? 1.0 : 0.0), 1.0, 5.0);
}

std::vector<Item> learnable_items(std::size_t n, std::uint64_t seed) {
  static const char* nouns[] = {"lamp", "kettle", "chair", "backpack", "speaker", "mug", "blanket", "clock"};
  static const char* adjs[] = {"compact", "classic", "sturdy", "modern", "handy", "simple"};
  br::SplitMix64 rng(seed);
  std::vector<Item> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Item it;
    it.id = "SYN" + std::to_string(100000 + i);
    it.category = "Home";
    it.brightness = rng.uniform01();
    it.flag = rng.below(2) == 1;
    const std::string noun = nouns[rng.below(8)];
    const std::string adj = adjs[rng.below(6)];
    it.title = (it.flag ? std::string(kKeyword) + " " : std::string()) + adj + " " + noun;
    it.description = "For everyday use.";
    it.features = "Easy to clean";
    it.rating = learnable_rating(it.brightness, it.flag);
    it.rating_number = 10 + rng.below(5000);
    it.height = 32 + rng.below(400);
    it.width = 32 + rng.below(400);
    it.image_seed = rng.next();
    items.push_back(std::move(it));
  }
  return items;
}

br::image::ImageTensor render(const Item& item) {
  br::SplitMix64 rng(item.image_seed);
  br::image::ImageTensor img;
  img.height = item.height;
  img.width = item.width;
  img.data.resize(item.height * item.width * 3);
  for (auto& v : img.data) {
    const double noise = (rng.uniform01() - 0.5) * 0.1;
    v = static_cast<float>(std::clamp(item.brightness + noise, 0.0, 1.0));
  }
  return img;
}

std::string item_json(const Item& item, const std::string& image_ref) {
  json j;
  j["main_category"] = item.category;
  j["title"] = item.title;
  j["average_rating"] = item.rating;
  j["rating_number"] = item.rating_number;
  j["features"] = json::array({item.features});
  j["description"] = json::array({item.description});
  j["images"] = json::array({json{{"variant", "MAIN"}, {"hi_res", image_ref}, {"large", image_ref}}});
  j["parent_asin"] = item.id;
  return j.dump();
}

fs::path write_dataset(const fs::path& dir, const std::vector<Item>& items) {
  fs::create_directories(dir / "images");
  const fs::path jsonl = dir / "items.jsonl";
  std::ofstream out(jsonl, std::ios::binary);
  for (const auto& it : items) {
    const std::string rel = "images/" + it.id + ".ppm";
    br::image::write_ppm(dir / rel, render(it));
    out << item_json(it, rel) << '\n';
  }
  return jsonl;
}

std::string catalog_jsonl(std::size_t n, std::size_t categories, std::uint64_t seed) {
  br::SplitMix64 rng(seed);
  std::string text;
  for (std::size_t i = 0; i < n; ++i) {
    json j;
    const std::size_t cat = i % categories;
    j["main_category"] = "Category" + std::to_string(cat);
    j["title"] = "item " + std::to_string(i);
    j["average_rating"] = 1.0 + 4.0 * rng.uniform01();
    // Heavy-tailed review counts, some below the minimum.
    const double u = rng.uniform01();
    j["rating_number"] = static_cast<std::uint64_t>(std::floor(std::exp(u * 10.0)));
    j["features"] = json::array();
    j["description"] = json::array({"synthetic"});
    json imgs = json::array();
    if (rng.below(20) != 0) {
      imgs.push_back({{"variant", "MAIN"}, {"hi_res", rng.below(3) ? json("img/" + std::to_string(i) + ".jpg") : json(nullptr)},
                      {"large", "img/" + std::to_string(i) + "_l.jpg"}});
    }
    imgs.push_back({{"variant", "PT01"}, {"hi_res", "img/" + std::to_string(i) + "_pt.jpg"}, {"large", nullptr}});
    j["images"] = imgs;
    j["parent_asin"] = "C" + std::to_string(cat) + "-" + std::to_string(1000000 + i);
    text += j.dump();
    text += '\n';
  }
  return text;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("boundreg_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace fixtures
