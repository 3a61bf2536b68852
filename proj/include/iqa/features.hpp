#pragma once

#include <string>
#include <vector>

#include "iqa/episode.hpp"

namespace iqa {

// Where a feature's value comes from; the memoryless extractor must never emit Memory.
enum class FeatureSource : std::uint8_t { Memory, Observation, Pose, Question, History, Progress };
std::string_view feature_source_name(FeatureSource s);

enum class FeatureMode : std::uint8_t { Memory, Memoryless };

struct FeatureOptions {
  FeatureMode mode = FeatureMode::Memory;
  bool question_blind = false;  // zero every question-dependent entry
  // Adds per-goal free/unknown summaries, reach flags, question-conditioned
  // readouts and episode progress on top of the base vector.
  bool extended = false;
  int window_size = 5;
  double tau = 0.5;
};

struct FeatureSpec {
  std::vector<std::string> names;
  std::vector<FeatureSource> sources;
  int size() const { return static_cast<int>(names.size()); }
};

FeatureSpec feature_spec(const FeatureOptions& opts);
std::vector<double> extract_features(const Episode& episode, const FeatureOptions& opts);

}  // namespace iqa
