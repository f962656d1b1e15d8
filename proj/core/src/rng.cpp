#include "odil/rng.hpp"

#include <cmath>

namespace odil {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag folded into the parent seed, then finalized.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::uint64_t substream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
  return mix64(substream(seed, tag) + 0x632be59bd9b4e019ULL * (index + 1));
}

double Rng::normal(double mean, double stddev) {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - unit();
  double u2 = unit();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  return mean + stddev * z;
}

std::size_t Rng::index(std::size_t n) {
  // multiply-shift range reduction; deterministic and cheap
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(gen_()) * n) >> 64);
}

}  // namespace odil
