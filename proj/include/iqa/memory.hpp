#pragma once

#include <span>
#include <string>
#include <vector>

#include "iqa/world.hpp"

namespace iqa {

struct MemoryConfig {
  double alpha = 0.5;        // moving-average rate, (0, 1]
  double tau_detect = 0.5;   // readout threshold
  int window_size = 5;       // egocentric read window for the planner
  int integration_window = 25;  // write window used when fusing a full frustum
  // Optional per-channel rates replacing alpha (the learnable gate, off when empty).
  std::vector<double> channel_alpha;

  void validate() const;
};

// H x W x (K + 3) grid. Channel layout: [0, K) detection probability per class,
// K free space, K+1 coverage, K+2 navigation intent.
class SpatialMemory {
 public:
  SpatialMemory() = default;
  // coverage_domain marks the cells coverage_fraction averages over (the free cells).
  SpatialMemory(int height, int width, int num_classes, std::vector<std::uint8_t> coverage_domain = {});

  int height() const { return height_; }
  int width() const { return width_; }
  int num_classes() const { return num_classes_; }
  int channels() const { return num_classes_ + 3; }
  int free_channel() const { return num_classes_; }
  int coverage_channel() const { return num_classes_ + 1; }
  int intent_channel() const { return num_classes_ + 2; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  double at(Cell c, int channel) const { return data_[offset(c) + static_cast<std::size_t>(channel)]; }
  std::span<const double> cell(Cell c) const { return {data_.data() + offset(c), static_cast<std::size_t>(channels())}; }
  std::span<const double> data() const { return data_; }
  const std::vector<std::uint8_t>& coverage_domain() const { return coverage_domain_; }

  std::vector<std::string> channel_names() const;

  friend bool operator==(const SpatialMemory&, const SpatialMemory&) = default;

 private:
  friend void write_window(SpatialMemory&, const struct EgoWindow&);
  friend void mark_navigation_intent(SpatialMemory&, Cell);
  friend SpatialMemory memory_from_values(int, int, int, std::vector<double>, std::vector<std::uint8_t>);

  std::size_t offset(Cell c) const {
    return (static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x)) *
           static_cast<std::size_t>(channels());
  }

  int height_ = 0;
  int width_ = 0;
  int num_classes_ = 0;
  std::vector<double> data_;
  std::vector<std::uint8_t> coverage_domain_;
};

// Build a memory from raw channel values (clamped into [0, 1]); used for
// ground-truth memories and snapshot loading.
SpatialMemory memory_from_values(int height, int width, int num_classes, std::vector<double> values,
                                 std::vector<std::uint8_t> coverage_domain = {});

// s x s patch in the agent frame: row r is r cells ahead (r = 0..s-1), column c
// is c - s/2 cells to the right.
struct EgoWindow {
  Cell center;
  Heading heading = Heading::N;
  int size = 5;
  int channels = 0;
  std::vector<double> values;

  double& at(int row, int col, int ch) { return values[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return values[index(row, col, ch)]; }
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * static_cast<std::size_t>(size) + static_cast<std::size_t>(col)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(ch);
  }
  // World cell under window entry (row, col).
  Cell world_cell(int row, int col) const;
  // Inverse of world_cell; false if the cell lies outside the footprint.
  bool locate(Cell world, int& row, int& col) const;
};

EgoWindow read_window(const SpatialMemory& mem, const AgentState& pose, int size);
void write_window(SpatialMemory& mem, const EgoWindow& window);

struct Detection {
  int channel = 0;  // unified class id: small object or receptacle
  Cell cell;
  friend bool operator==(const Detection&, const Detection&) = default;
};

// Detector output: free-space labels for every visible cell plus class detections.
struct Detections {
  AgentState pose;
  std::vector<VisibleCell> cells;
  std::vector<Detection> items;
};

// Moving-average fusion of one frame, written through the egocentric window.
void integrate_observation(SpatialMemory& mem, const Detections& detections, const MemoryConfig& cfg);

void mark_navigation_intent(SpatialMemory& mem, Cell goal);
double coverage_fraction(const SpatialMemory& mem);

}  // namespace iqa
