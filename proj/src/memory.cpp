#include "iqa/memory.hpp"

#include <algorithm>
#include <map>

namespace iqa {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double rate_for(const MemoryConfig& cfg, int channel) {
  if (!cfg.channel_alpha.empty()) return cfg.channel_alpha[static_cast<std::size_t>(channel)];
  return cfg.alpha;
}

}  // namespace

void MemoryConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw MalformedSpec("memory alpha must lie in (0, 1]");
  if (window_size <= 0 || window_size % 2 == 0) throw MalformedSpec("memory window size must be odd");
  if (integration_window <= 0 || integration_window % 2 == 0) throw MalformedSpec("integration window must be odd");
  for (double a : channel_alpha)
    if (!(a > 0.0 && a <= 1.0)) throw MalformedSpec("channel rate must lie in (0, 1]");
}

SpatialMemory::SpatialMemory(int height, int width, int num_classes, std::vector<std::uint8_t> coverage_domain)
    : height_(height), width_(width), num_classes_(num_classes), coverage_domain_(std::move(coverage_domain)) {
  data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels()),
               0.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) data_[offset({x, y}) + static_cast<std::size_t>(free_channel())] = 0.5;
  if (coverage_domain_.empty()) coverage_domain_.assign(static_cast<std::size_t>(height * width), 1);
}

std::vector<std::string> SpatialMemory::channel_names() const {
  std::vector<std::string> names;
  for (int c = 0; c < num_classes_; ++c) {
    if (c < kNumObjectClasses) names.emplace_back(kObjectNames[static_cast<std::size_t>(c)]);
    else if (c < kNumClasses) names.emplace_back(kReceptacleNames[static_cast<std::size_t>(c - kNumObjectClasses)]);
    else names.push_back("class" + std::to_string(c));
  }
  names.emplace_back("free");
  names.emplace_back("coverage");
  names.emplace_back("intent");
  return names;
}

SpatialMemory memory_from_values(int height, int width, int num_classes, std::vector<double> values,
                                 std::vector<std::uint8_t> coverage_domain) {
  SpatialMemory mem(height, width, num_classes, std::move(coverage_domain));
  if (values.size() != mem.data_.size()) throw DimensionMismatch("memory values do not match H x W x (K+3)");
  for (auto& v : values) v = clamp01(v);
  mem.data_ = std::move(values);
  return mem;
}

Cell EgoWindow::world_cell(int row, int col) const {
  return center + forward_vector(heading) * row + right_vector(heading) * (col - size / 2);
}

bool EgoWindow::locate(Cell world, int& row, int& col) const {
  const Cell d = world - center;
  const Cell f = forward_vector(heading);
  const Cell r = right_vector(heading);
  row = d.x * f.x + d.y * f.y;
  col = d.x * r.x + d.y * r.y + size / 2;
  return row >= 0 && row < size && col >= 0 && col < size;
}

EgoWindow read_window(const SpatialMemory& mem, const AgentState& pose, int size) {
  if (size <= 0 || size % 2 == 0) throw DimensionMismatch("window size must be odd");
  EgoWindow w;
  w.center = pose.cell;
  w.heading = pose.heading;
  w.size = size;
  w.channels = mem.channels();
  w.values.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size) * static_cast<std::size_t>(w.channels),
                  0.0);
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      const Cell c = w.world_cell(row, col);
      if (!mem.in_bounds(c)) continue;  // padding: free = 0, everything else 0
      const auto src = mem.cell(c);
      std::copy(src.begin(), src.end(), w.values.begin() + static_cast<std::ptrdiff_t>(w.index(row, col, 0)));
    }
  }
  return w;
}

void write_window(SpatialMemory& mem, const EgoWindow& window) {
  if (window.channels != mem.channels()) throw DimensionMismatch("window channel count differs from memory");
  for (int row = 0; row < window.size; ++row) {
    for (int col = 0; col < window.size; ++col) {
      const Cell c = window.world_cell(row, col);
      if (!mem.in_bounds(c)) continue;
      const std::size_t dst = mem.offset(c);
      for (int ch = 0; ch < window.channels; ++ch) {
        mem.data_[dst + static_cast<std::size_t>(ch)] = clamp01(window.at(row, col, ch));
      }
    }
  }
}

void integrate_observation(SpatialMemory& mem, const Detections& detections, const MemoryConfig& cfg) {
  EgoWindow w = read_window(mem, detections.pose, cfg.integration_window);
  const int k = mem.num_classes();

  // Detections grouped per cell; duplicates collapse so fusion order never matters.
  std::map<Cell, std::vector<int>> detected;
  for (const auto& d : detections.items) {
    if (d.channel < 0 || d.channel >= k) continue;
    auto& v = detected[d.cell];
    if (std::find(v.begin(), v.end(), d.channel) == v.end()) v.push_back(d.channel);
  }

  auto blend = [&](double& v, double target, int ch) {
    const double a = rate_for(cfg, ch);
    v = (1.0 - a) * v + a * target;
  };

  std::map<Cell, bool> handled;
  for (const auto& vc : detections.cells) {
    int row = 0, col = 0;
    if (!w.locate(vc.cell, row, col) || !mem.in_bounds(vc.cell)) continue;
    handled[vc.cell] = true;
    blend(w.at(row, col, mem.free_channel()), vc.is_free ? 1.0 : 0.0, mem.free_channel());
    if (vc.fully_visible) w.at(row, col, mem.coverage_channel()) = 1.0;
    const auto it = detected.find(vc.cell);
    for (int ch = 0; ch < k; ++ch) {
      const bool present = it != detected.end() && std::find(it->second.begin(), it->second.end(), ch) != it->second.end();
      if (ch >= kNumObjectClasses) {
        if (present) w.at(row, col, ch) = 1.0;  // receptacles are written with certainty on sighting
        continue;
      }
      if (present) blend(w.at(row, col, ch), 1.0, ch);
      else if (vc.fully_visible) blend(w.at(row, col, ch), 0.0, ch);
    }
  }
  // Detections displaced onto cells outside the visible set: positive evidence only.
  for (const auto& [cell, channels] : detected) {
    if (handled.count(cell)) continue;
    int row = 0, col = 0;
    if (!w.locate(cell, row, col) || !mem.in_bounds(cell)) continue;
    for (int ch : channels) {
      if (ch >= kNumObjectClasses) w.at(row, col, ch) = 1.0;
      else blend(w.at(row, col, ch), 1.0, ch);
    }
  }
  write_window(mem, w);
}

void mark_navigation_intent(SpatialMemory& mem, Cell goal) {
  if (!mem.in_bounds(goal)) return;
  mem.data_[mem.offset(goal) + static_cast<std::size_t>(mem.intent_channel())] = 1.0;
}

double coverage_fraction(const SpatialMemory& mem) {
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < mem.height(); ++y) {
    for (int x = 0; x < mem.width(); ++x) {
      if (!mem.coverage_domain()[static_cast<std::size_t>(y * mem.width() + x)]) continue;
      sum += mem.at({x, y}, mem.coverage_channel());
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

}  // namespace iqa
