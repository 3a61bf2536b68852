#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace iqa {

// Error taxonomy. Invalid low-level actions are values (ActionOutcome), not errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedSpec : Error { using Error::Error; };
struct UnreachableLayout : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct ImbalanceFound : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EpisodeFinished : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct ConfigMismatch : Error { using Error::Error; };

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
  Cell operator+(Cell o) const { return {x + o.x, y + o.y}; }
  Cell operator-(Cell o) const { return {x - o.x, y - o.y}; }
  Cell operator*(int k) const { return {x * k, y * k}; }
};

// y grows southwards; N points to -y.
enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

inline Cell forward_vector(Heading h) {
  switch (h) {
    case Heading::N: return {0, -1};
    case Heading::E: return {1, 0};
    case Heading::S: return {0, 1};
    case Heading::W: return {-1, 0};
  }
  return {0, 0};
}
inline Cell right_vector(Heading h) {
  return forward_vector(static_cast<Heading>((static_cast<int>(h) + 1) % 4));
}
inline Heading turned_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading turned_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

// Camera pitch in degrees: -30 looks down, +30 looks up.
enum class Pitch : std::int8_t { Down = -30, Level = 0, Up = 30 };

enum class HeightBand : std::uint8_t { Low = 0, Mid = 1, High = 2 };

inline HeightBand band_for_pitch(Pitch p) {
  switch (p) {
    case Pitch::Down: return HeightBand::Low;
    case Pitch::Level: return HeightBand::Mid;
    case Pitch::Up: return HeightBand::High;
  }
  return HeightBand::Mid;
}

// Class vocabulary. Small (movable) objects come first, receptacle classes after;
// both kinds own a detection channel in spatial memory.
inline constexpr int kNumObjectClasses = 8;
inline constexpr int kNumReceptacleClasses = 6;
inline constexpr int kNumClasses = kNumObjectClasses + kNumReceptacleClasses;

inline constexpr std::array<std::string_view, kNumObjectClasses> kObjectNames = {
    "apple", "bread", "cup", "fork", "lettuce", "mug", "potato", "tomato"};
inline constexpr std::array<std::string_view, kNumReceptacleClasses> kReceptacleNames = {
    "fridge", "cabinet", "microwave", "drawer", "countertop", "table"};

enum class ReceptacleClass : std::uint8_t { Fridge, Cabinet, Microwave, Drawer, Countertop, Table };

inline constexpr bool default_openable(ReceptacleClass c) {
  return c == ReceptacleClass::Fridge || c == ReceptacleClass::Cabinet ||
         c == ReceptacleClass::Microwave || c == ReceptacleClass::Drawer;
}

// Unified detection-channel id of a receptacle class.
inline constexpr int receptacle_channel(ReceptacleClass c) {
  return kNumObjectClasses + static_cast<int>(c);
}

std::optional<int> object_class_from_name(std::string_view name);
std::optional<ReceptacleClass> receptacle_class_from_name(std::string_view name);
std::string_view heading_name(Heading h);
std::optional<Heading> heading_from_name(std::string_view name);
std::string_view band_name(HeightBand b);
std::optional<HeightBand> band_from_name(std::string_view name);

}  // namespace iqa
