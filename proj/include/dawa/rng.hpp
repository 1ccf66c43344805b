#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace dawa {

// Seeded stream used everywhere randomness appears. Independent streams are
// derived from a tuple of integers (run seed, example index, restart, ...),
// so concurrent work never shares generator state.
class Rng {
 public:
  explicit Rng(std::initializer_list<std::uint64_t> key) : Rng(std::span<const std::uint64_t>(key.begin(), key.size())) {}
  explicit Rng(std::span<const std::uint64_t> key) {
    // seed_seq keeps only 32 bits per word, so split each key word in two.
    std::vector<std::uint32_t> words;
    for (std::uint64_t k : key) {
      words.push_back(static_cast<std::uint32_t>(k));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  // Uniform in [0, 1) from the top 53 bits; identical on every platform.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() { return normal_(engine_); }

  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dawa
