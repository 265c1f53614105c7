#pragma once

#include <cmath>
#include <cstdint>

namespace swavg {

// Counter-free splittable stream built on the SplitMix64 mixer. A substream
// is keyed by (master seed, a, b); paths derived this way are independent of
// scheduling order, which is what makes parallel runs bit-reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  static RngStream substream(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = mix(master + kGamma);
    s = mix(s ^ mix(a + kGamma * 3));
    s = mix(s ^ mix(b + kGamma * 5));
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // uniform on (0,1); never returns 0 or 1, so log() below is safe
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 significant bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace swavg
