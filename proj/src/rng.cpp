#include "iqa/rng.hpp"

#include "iqa/common.hpp"

namespace iqa {

std::uint64_t Rng::index(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t r = engine_();
  while (r >= limit) r = engine_();
  return r % n;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (splitmix64(value) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

std::uint64_t hash_string(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::optional<int> object_class_from_name(std::string_view name) {
  for (int i = 0; i < kNumObjectClasses; ++i) {
    if (kObjectNames[static_cast<std::size_t>(i)] == name) return i;
  }
  return std::nullopt;
}

std::optional<ReceptacleClass> receptacle_class_from_name(std::string_view name) {
  for (int i = 0; i < kNumReceptacleClasses; ++i) {
    if (kReceptacleNames[static_cast<std::size_t>(i)] == name) return static_cast<ReceptacleClass>(i);
  }
  return std::nullopt;
}

std::string_view heading_name(Heading h) {
  static constexpr std::string_view names[] = {"N", "E", "S", "W"};
  return names[static_cast<int>(h)];
}

std::optional<Heading> heading_from_name(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (heading_name(static_cast<Heading>(i)) == name) return static_cast<Heading>(i);
  }
  return std::nullopt;
}

std::string_view band_name(HeightBand b) {
  static constexpr std::string_view names[] = {"low", "mid", "high"};
  return names[static_cast<int>(b)];
}

std::optional<HeightBand> band_from_name(std::string_view name) {
  for (int i = 0; i < 3; ++i) {
    if (band_name(static_cast<HeightBand>(i)) == name) return static_cast<HeightBand>(i);
  }
  return std::nullopt;
}

}  // namespace iqa
