#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace iqa {

// Seeded engine plus portable helpers. The std distributions are not specified
// bit-for-bit across standard libraries, so draws are derived from raw engine
// output to keep generated datasets byte-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform01() < p; }
  // Unbiased integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  int uniform_int(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::uint64_t>(hi - lo + 1))); }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_string(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace iqa
