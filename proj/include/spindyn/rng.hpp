#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "spindyn/types.hpp"

namespace spindyn {

// 64-bit FNV-1a, used for stream derivation and for hashing model files.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
  auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-stream seed: hash of (master seed, label, index).
// Every independent consumer of randomness derives its own stream, so
// results do not depend on scheduling or thread count.
inline std::uint64_t derive_stream(std::uint64_t master, std::string_view label,
                                   std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(label.data(), label.size());
  h = fnv1a64(&master, sizeof master, h);
  h = fnv1a64(&index, sizeof index, h);
  return splitmix64(h);
}

// mt19937_64 with hand-rolled uniform/normal conversions.  The standard
// distributions are implementation-defined, which would break bit-for-bit
// reproducibility across toolchains; the raw engine output is not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  // Uniform in [a, b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection to avoid modulo bias.
    std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= lim);
    return x % n;
  }

  // Standard normal via Box-Muller; caches the second deviate.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Vec3 gaussian3() {
    double x = gaussian(), y = gaussian(), z = gaussian();
    return Vec3(x, y, z);
  }

  // Uniform direction on the unit sphere.
  Vec3 sphere() {
    double z = uniform(-1.0, 1.0);
    double phi = uniform(0.0, 2.0 * pi);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }

  // Uniform direction within a cone of half-angle `alpha` about `axis`.
  Vec3 cone(const Vec3& axis, double alpha) {
    double c = 1.0 - uniform() * (1.0 - std::cos(alpha));
    double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    double phi = uniform(0.0, 2.0 * pi);
    Vec3 local(s * std::cos(phi), s * std::sin(phi), c);
    // Orthonormal frame with third column along axis.
    Vec3 n = axis.normalized();
    Vec3 t = std::abs(n.z()) < 0.9 ? Vec3(0, 0, 1).cross(n).normalized()
                                   : Vec3(1, 0, 0).cross(n).normalized();
    Vec3 b = n.cross(t);
    return local.x() * t + local.y() * b + local.z() * n;
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace spindyn
