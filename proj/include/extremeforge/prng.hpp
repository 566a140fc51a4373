#pragma once

#include <cstdint>
#include <string_view>

namespace extremeforge {

struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(const Seed&, const Seed&) = default;
};

// splitmix64; the exact constants and draw order are part of the output
// contract for the classical simulators.
class SplitMix64 {
 public:
  explicit SplitMix64(Seed seed) noexcept : state_(seed.value) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t x = state_;
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Per-image seed for batch jobs: independent of processing order.
inline Seed derive_seed(Seed base, std::string_view image_id) noexcept {
  SplitMix64 mix(Seed{base.value ^ fnv1a64(image_id)});
  return Seed{mix.next()};
}

}  // namespace extremeforge
