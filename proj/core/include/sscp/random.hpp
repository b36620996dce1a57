#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace sscp {

/// One step of the splitmix64 generator. Advances `state`.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Derives an independent stream seed from a parent seed and a path of
/// stream labels. Each label is folded in with a splitmix64 round, so
/// `derive_seed(s, {a, b})` differs from `derive_seed(s, {b, a})` and adding
/// new labels never changes the seeds of existing paths.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept;

/// Stable 64-bit FNV-1a hash of raw bytes.
std::uint64_t hash_bytes(std::span<const std::byte> bytes) noexcept;

/// Pseudo-random source with distributions defined here rather than by the
/// standard library, so streams are bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller (pairs are cached).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace sscp
