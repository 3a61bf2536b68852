#include <doctest.h>

#include <set>

#include "support.hpp"

using namespace iqa;
using namespace iqa::test;

namespace {

Episode make_episode(const RoomSpec& room, QuestionType qt, std::uint64_t seed) {
  Rng rng(seed);
  std::optional<ReceptacleClass> container;
  if (qt == QuestionType::SpatialRelationship) container = room.receptacles.front().class_id;
  const Question q = make_question(qt, 1, container);
  return Episode(room, make_item(room, q, generate_configuration(room, {}, rng)), EpisodeOptions{});
}

}  // namespace

TEST_CASE("base feature layout: pooled crop, question, last action, outcome, coverage") {
  FeatureOptions o;
  const int channels = kNumClasses + 3;
  const int question = kNumQuestionTypes + kNumObjectClasses + kNumReceptacleClasses;
  const int history = kNumPlannerActions + 2;
  CHECK(feature_spec(o).size() == 2 * channels + question + history + 1);
  o.mode = FeatureMode::Memoryless;
  CHECK(feature_spec(o).size() == kNumClasses + 1 + question + history);
  o.extended = true;
  CHECK(feature_spec(o).size() > kNumClasses + 1 + question + history);
}

TEST_CASE("feature vectors match their spec") {
  const auto room = generate_kitchen("f", 10, 10, 3);
  for (int variant = 0; variant < 4; ++variant) {
    FeatureOptions o;
    o.mode = variant % 2 ? FeatureMode::Memoryless : FeatureMode::Memory;
    o.extended = variant >= 2;
    const FeatureSpec spec = feature_spec(o);
    CHECK(spec.names.size() == spec.sources.size());
    CHECK(std::set<std::string>(spec.names.begin(), spec.names.end()).size() == spec.names.size());
    Episode ep = make_episode(room, QuestionType::Counting, 1);
    for (int t = 0; t < 10 && !ep.done(); ++t) {
      const auto x = extract_features(ep, o);
      CHECK(static_cast<int>(x.size()) == spec.size());
      for (double v : x) CHECK(std::isfinite(v));
      ep.step(kScanLeft);
    }
  }
}

TEST_CASE("the memoryless extractor never reads the spatial memory") {
  FeatureOptions o;
  o.mode = FeatureMode::Memoryless;
  for (FeatureSource s : feature_spec(o).sources) CHECK(s != FeatureSource::Memory);
  o.extended = true;
  for (FeatureSource s : feature_spec(o).sources) CHECK(s != FeatureSource::Memory);
  o.mode = FeatureMode::Memory;
  int memory_features = 0;
  for (FeatureSource s : feature_spec(o).sources) memory_features += s == FeatureSource::Memory;
  CHECK(memory_features > 0);
}

TEST_CASE("question-blind features zero exactly the question entries") {
  const auto room = generate_kitchen("b", 10, 10, 9);
  for (QuestionType qt : {QuestionType::Existence, QuestionType::Counting, QuestionType::SpatialRelationship}) {
    Episode ep = make_episode(room, qt, 4);
    ep.step(kScanRight);
    FeatureOptions full, blind;
    blind.question_blind = true;
    const FeatureSpec spec = feature_spec(full);
    const auto a = extract_features(ep, full);
    const auto b = extract_features(ep, blind);
    REQUIRE(a.size() == b.size());
    bool any_question_signal = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (spec.sources[i] == FeatureSource::Question) {
        CHECK(b[i] == 0.0);
        any_question_signal = any_question_signal || a[i] != 0.0;
      } else {
        CHECK(a[i] == b[i]);
      }
    }
    CHECK(any_question_signal);
  }
}
