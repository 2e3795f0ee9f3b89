#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "br/imageprep.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// One synthetic catalog item. The rating is an affine function of the image
// brightness and of a keyword in the title, clipped to [1, 5].
struct Item {
  std::string id;
  std::string category;
  std::string title;
  std::string description;
  std::string features;
  double brightness = 0.5;
  bool flag = false;
  double rating = 3.0;
  std::uint64_t rating_number = 0;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t image_seed = 0;
};

inline constexpr const char* kKeyword = "PREMIUM-GRADE-CERTIFIED";

double learnable_rating(double brightness, bool flag);

std::vector<Item> learnable_items(std::size_t n, std::uint64_t seed);

// Flat-colored image at the item's brightness with small seeded noise.
br::image::ImageTensor render(const Item& item);

// Amazon-style metadata line with a MAIN image pointing at `image_ref`.
std::string item_json(const Item& item, const std::string& image_ref);

// Writes items.jsonl and images/<id>.ppm under dir; returns the JSONL path.
fs::path write_dataset(const fs::path& dir, const std::vector<Item>& items);

// Image-free catalog for sampling checks: `n` records across `categories`
// categories with skewed review counts; roughly 10% fail a filter.
std::string catalog_jsonl(std::size_t n, std::size_t categories, std::uint64_t seed);

// Fresh empty directory under the system temp dir.
fs::path scratch_dir(const std::string& name);

}  // namespace fixtures
