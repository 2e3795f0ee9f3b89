#include "br/rng.hpp"

#include <limits>

namespace br {

std::uint64_t SplitMix64::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = next();
  while (v >= limit) v = next();
  return v % n;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) {
  // FNV-1a over the stream name, folded into the root and finalized by one
  // SplitMix64 step.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  SplitMix64 mix(root ^ h);
  return mix.next();
}

}  // namespace br
