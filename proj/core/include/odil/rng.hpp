#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace odil {

// splitmix64 finalizer, used to decorrelate derived seeds.
std::uint64_t mix64(std::uint64_t x);

// Named substream derivation. Every RNG consumer in the project derives its
// seed as substream(parent_seed, "purpose"[, index]) so that independent
// consumers (weight init, per-domain data, per-epoch shuffles, adaptation
// noise) never share a stream. Distinct tags give distinct streams.
std::uint64_t substream(std::uint64_t seed, std::string_view tag);
std::uint64_t substream(std::uint64_t seed, std::string_view tag, std::uint64_t index);

// Deterministic RNG with pinned sampling algorithms. std::*_distribution is
// implementation-defined, which would break bit-reproducibility across
// standard libraries, so uniform/normal are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Box-Muller without second-value carry; one draw per call.
  double normal(double mean = 0.0, double stddev = 1.0);

  // index in [0, n), n >= 1
  std::size_t index(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace odil
