#pragma once

#include <set>
#include <vector>

#include "iqa/episode.hpp"

namespace iqa {

struct ScriptedOptions {
  double coverage_target = 0.98;
  bool inspect_receptacles = true;
};

// Deterministic sweep planner used as the oracle reference. It plans on the
// ground-truth layout: view poses are chosen greedily by newly covered cells
// per estimated planner step, then every receptacle is inspected at its
// height band and every openable one is opened once and closed again.
class ScriptedExplorer {
 public:
  explicit ScriptedExplorer(ScriptedOptions opts = {}) : opts_(opts) {}

  int next_action(const Episode& episode);
  // Receptacle indices this explorer has opened.
  const std::set<int>& opened() const { return opened_; }

 private:
  int drive_to(const Episode& ep, const AgentState& target);

  ScriptedOptions opts_;
  bool exploring_ = true;
  bool pending_close_ = false;
  std::set<int> opened_;
  std::set<int> skipped_;
  std::vector<std::vector<AgentState>> service_poses_;
};

// Always submits one fixed choice per question type (the modal training answer).
std::array<int, kNumQuestionTypes> modal_answers(const std::vector<DatasetItem>& items);

}  // namespace iqa
