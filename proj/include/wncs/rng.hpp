#pragma once

#include <cstdint>

namespace wncs {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based stream: every draw is a pure function of
// (key, counter, lane), so draws never depend on evaluation order.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t master_seed, std::uint64_t run)
      : key_(mix64(master_seed ^ mix64(run + 0x632be59bd9b4e019ull))) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t bits(std::uint64_t counter, std::uint64_t lane) const {
    return mix64(mix64(key_ ^ mix64(counter)) + lane);
  }
  // Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter, std::uint64_t lane) const {
    return static_cast<double>(bits(counter, lane) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

}  // namespace wncs
