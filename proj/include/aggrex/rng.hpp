#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>

namespace aggrex {

// FNV-1a over bytes; stable content hash for stream labels and run manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

// 64-bit finalizer with full avalanche (splitmix64 / murmur3 style).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: output n is mix64(state + n*gamma) with a per-stream
// odd gamma, so streams derived from distinct id paths are statistically
// independent and a stream's position never affects its children. Works like
// the usual splittable splitmix construction; good enough for Monte Carlo,
// not for cryptography.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) { reset(mix64(seed ^ 0x5851f42d4c957f2dULL)); }

  // Child stream identified by `id`; deterministic, independent of how many
  // values the parent has produced.
  RngStream derive(std::uint64_t id) const {
    RngStream child;
    child.reset(mix64(base_ ^ mix64(id ^ 0xd1b54a32d192ed03ULL)));
    return child;
  }

  // Convenience for multi-component id paths.
  RngStream derive_path(std::initializer_list<std::uint64_t> ids) const {
    RngStream s = *this;
    for (auto id : ids) s = s.derive(id);
    return s;
  }

  std::uint64_t next_u64() {
    state_ += gamma_;
    return mix64(state_);
  }

  // Uniform on the open interval (0, 1); never returns an exact endpoint so
  // inverse-CDF sampling stays finite.
  double next_u01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Multiply-shift; bias is < 2^-53 of n, irrelevant at pool sizes here.
    return static_cast<std::uint64_t>(next_u01() * static_cast<double>(n));
  }

 private:
  void reset(std::uint64_t key) {
    base_ = key;
    state_ = key;
    gamma_ = mix64(key ^ 0x9e3779b97f4a7c15ULL) | 1ULL;
  }

  std::uint64_t base_ = 0;   // stream identity, fixed at construction
  std::uint64_t state_ = 0;  // advances as values are drawn
  std::uint64_t gamma_ = 1;
};

}  // namespace aggrex
