#pragma once

#include <cmath>
#include <cstdint>

namespace pacnet {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so parallel generation is order-independent and
// runs are reproducible bit-for-bit regardless of worker count.
namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dull);
  h = mix64(h ^ stream);
  h = mix64(h ^ counter);
  return h;
}

// Uniform in the open interval (0,1); never returns 0 or 1 exactly.
inline double uniform(std::uint64_t seed, std::uint64_t stream,
                      std::uint64_t counter) {
  const std::uint64_t h = hash3(seed, stream, counter);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two decorrelated uniforms.
inline double gaussian(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t counter) {
  const double u1 = uniform(seed, stream ^ 0xa5a5a5a5a5a5a5a5ull, counter);
  const double u2 = uniform(seed, stream ^ 0xc3c3c3c3c3c3c3c3ull, counter);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

// Uniform integer in [0, bound); bound must be > 0.
inline std::uint64_t below(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t counter, std::uint64_t bound) {
  return hash3(seed, stream, counter) % bound;
}

// Derive a child seed for an independent sub-stream (per clip, per layer...).
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}

inline std::uint64_t derive(std::uint64_t seed, const char* tag) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* p = tag; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ull;
  }
  return derive(seed, h);
}

}  // namespace rng
}  // namespace pacnet
