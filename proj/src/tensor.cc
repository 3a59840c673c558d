#include "dictattach/tensor.h"

#include "dictattach/text.h"

namespace dictattach {

uint64_t DeriveSeed(uint64_t seed, std::string_view label) {
  // splitmix64 finalizer over an FNV mix of the label and the seed.
  uint64_t z = Fnv1a64(label, seed ^ 0x9E3779B97F4A7C15ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace dictattach
