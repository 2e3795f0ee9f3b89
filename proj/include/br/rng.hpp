#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace br {

// SplitMix64 stream. All stochastic components (weight init, dropout masks,
// shuffles, holdout splits) draw from this generator so that results are
// bit-identical across platforms and standard library implementations.
//
//   state += 0x9e3779b97f4a7c15
//   z = state
//   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection of the short tail.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Independent sub-stream seed for a named consumer of the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Fisher-Yates, walking from the back: for i = n-1..1 swap(i, below(i+1)).
template <typename T>
void shuffle(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace br
