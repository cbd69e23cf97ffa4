#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mcpeval {

using SeedPath = std::vector<std::pair<std::string, std::uint64_t>>;

/// Derives a child seed from a master seed and a label path such as
/// {("split", 3)} or {("model", 7), ("tree", 12)}.
///
/// Construction (stable across releases, do not change):
///   h = mix(master ^ 0x6d63706576616c31)
///   for each (label, index):
///     h = mix(h ^ fnv1a64(label))
///     h = mix(h ^ index)
/// where mix is the SplitMix64 finalizer and fnv1a64 the 64-bit FNV-1a hash
/// of the label bytes. The result depends only on its arguments, so work
/// items seeded this way can run in any order.
std::uint64_t derive_seed(std::uint64_t master_seed, const SeedPath& labels);

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label, std::uint64_t index);

std::uint64_t splitmix64_mix(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Portable random source: std::mt19937_64 is bit-specified by the standard,
// while the std distributions are not, so the transforms live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  // Standard normal via Box-Muller; the second variate is cached.
  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mcpeval
