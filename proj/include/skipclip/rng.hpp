#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace skipclip {

/// Deterministic random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// draws integers and reals with explicit arithmetic instead of the std
/// distributions, whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Stream keyed by a root seed, a fixed label and up to two indices.
  static Rng derive(std::uint64_t seed, std::string_view label, std::uint64_t a = 0,
                    std::uint64_t b = 0);

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform in [0, 1) with 53 bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  bool bernoulli(double p);

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace skipclip
