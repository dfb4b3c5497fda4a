#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace aoirelay {

// Portable random stream. The engine sequence is fixed by the standard;
// every variate below is derived from raw 64-bit words with our own
// transforms, so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Exponential variate with the given mean (mean > 0).
  double exponential(double mean);

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). Unbiased (rejection on the top range).
  std::size_t uniform_index(std::size_t n);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Derives a child seed from (master, label). The label is hashed with
// 64-bit FNV-1a and combined through SplitMix64; adding a new label never
// changes the streams of existing labels.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

inline Rng seed_stream(std::uint64_t master, std::string_view label) {
  return Rng(derive_seed(master, label));
}

}  // namespace aoirelay
