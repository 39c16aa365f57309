#ifndef MEDEX_RNG_HPP
#define MEDEX_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace medex::rng {

// Every random quantity in the library flows from one top-level seed through
// derive(): a seed plus a tag path names an independent stream. Streams are
// stable across runs, platforms and thread counts, which is what makes
// byte-identical replays possible.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
  return mix64(seed ^ hash_tag(tag));
}

inline std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t a) {
  return mix64(derive(seed, tag) ^ mix64(a));
}

inline std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t a,
                            std::uint64_t b) {
  return mix64(derive(seed, tag, a) ^ mix64(~b));
}

//! A self-contained random stream. The 53-bit uniform mapping is done by hand
//! so draws do not depend on the standard library's distribution internals.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t bits() { return engine_(); }

  //! Uniform on [0,1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  //! Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  //! Standard normal via Box-Muller (no cached spare, so draw order is plain).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  //! Fisher-Yates shuffle of indices 0..n-1.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace medex::rng

#endif
