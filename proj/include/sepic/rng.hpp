#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace sepic {

// Counter-based random streams. Every draw is a pure function of a 64-bit
// key, so parallel and serial execution produce identical numbers and a
// (seed, stream, step, draw) tuple can be replayed at any time.
namespace rng {

inline std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix(h + 0x9e3779b97f4a7c15ULL + v);
}

template <typename... Rest>
inline std::uint64_t combine(std::uint64_t h, std::uint64_t v, Rest... rest) {
  return combine(combine(h, v), rest...);
}

// uniform in (0, 1]; never 0 so it is safe under log()
inline double uniform_open(std::uint64_t key) {
  return static_cast<double>((mix(key) >> 11) + 1) * 0x1.0p-53;
}

// uniform in [0, 1)
inline double uniform(std::uint64_t key) {
  return static_cast<double>(mix(key) >> 11) * 0x1.0p-53;
}

// Two independent standard normals per key (Box-Muller).
inline std::pair<double, double> normal_pair(std::uint64_t key) {
  const double u1 = uniform_open(combine(key, 0x736f6d6570736575ULL));
  const double u2 = uniform(combine(key, 0x646f72616e646f6dULL));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 6.283185307179586476925286766559 * u2;
  return {r * std::cos(th), r * std::sin(th)};
}

inline double normal(std::uint64_t key) { return normal_pair(key).first; }

// Seed domains keep environment noise, controller rollouts and probe sets
// on disjoint streams even when they share a master seed.
enum class Domain : std::uint64_t {
  episode = 0x45505349ULL,
  environment = 0x454e5649ULL,
  controller = 0x4354524cULL,
  probe = 0x50524f42ULL,
};

inline std::uint64_t derive(std::uint64_t seed, Domain d) {
  return combine(seed, static_cast<std::uint64_t>(d));
}

template <typename... Rest>
inline std::uint64_t derive(std::uint64_t seed, Domain d, Rest... rest) {
  return combine(combine(seed, static_cast<std::uint64_t>(d)), static_cast<std::uint64_t>(rest)...);
}

}  // namespace rng
}  // namespace sepic
