#include <doctest.h>

#include <filesystem>
#include <thread>

#include "iqa/server.hpp"
#include "iqa/trajectory_log.hpp"
#include "support.hpp"

using namespace iqa;
using namespace iqa::test;
using nlohmann::json;

namespace {

std::shared_ptr<const ServerData> server_data(const std::filesystem::path& log_dir = {}) {
  static const SmallWorld w = small_world(6);
  auto d = std::make_shared<ServerData>();
  d->rooms = w.table;
  for (const auto& it : w.dataset.items) d->items[it.item_id] = it;
  d->room_split = w.dataset.room_split;
  d->options.seed = 3;
  d->options.episode.controller.detector = DetectorModel::noisy(0.85, 0.005, 0.1);
  d->options.log_dir = log_dir;
  return d;
}

std::string first_test_item(const ServerData& d) {
  for (const auto& [id, it] : d.items)
    if (it.split == Split::Test) return id;
  return {};
}

// Deterministic client: scan around, then the first valid navigation, then answer.
int rule_action(const json& state) {
  const int steps = state.at("step_counters").at("planner_steps").get<int>();
  const auto& valid = state.at("valid_actions");
  if (steps < 4) return kScanLeft;
  if (steps < 8)
    for (int a = 0; a < kNumNavigateActions; ++a)
      if (valid[static_cast<std::size_t>(a)].get<bool>()) return a;
  return kAnswerAction;
}

template <class Send>
json play(Send&& send, const std::string& item) {
  json msg = send(json{{"type", "reset"}, {"item_id", item}, {"control", "planner"}});
  while (msg.at("type") == "state") msg = send(json{{"type", "step"}, {"action", rule_action(msg)}});
  return msg;
}

}  // namespace

TEST_CASE("reset returns the full state message") {
  const auto data = server_data();
  Session s(data);
  const json st = s.handle({{"type", "reset"}, {"item_id", first_test_item(*data)}});
  REQUIRE(st.at("type") == "state");
  CHECK(st.at("valid_actions").size() == static_cast<std::size_t>(kNumPlannerActions));
  CHECK(st.at("done") == false);
  CHECK(st.at("question").contains("text"));
  const auto& map = st.at("topdown_map");
  CHECK(map.at("rows").size() == static_cast<std::size_t>(map.at("height").get<int>()));
  CHECK(map.at("rows")[0].get<std::string>().size() == static_cast<std::size_t>(map.at("width").get<int>()));
  CHECK(st.at("egocentric_view").contains("pose"));
  CHECK(st.at("step_counters").at("planner_steps") == 0);
}

TEST_CASE("protocol errors leave the session usable") {
  const auto data = server_data();
  Session s(data);
  CHECK(s.handle({{"type", "step"}, {"action", 1}}).at("code") == "no_episode");
  CHECK(s.handle({{"foo", 1}}).at("code") == "bad_request");
  CHECK(s.handle({{"type", "dance"}}).at("code") == "unknown_type");
  CHECK(s.handle({{"type", "reset"}, {"item_id", "nope"}}).at("code") == "unknown_item");
  REQUIRE(s.handle({{"type", "reset"}, {"item_id", first_test_item(*data)}}).at("type") == "state");
  CHECK(s.handle({{"type", "step"}, {"action", 32}}).at("code") == "bad_action");
  CHECK(s.handle({{"type", "step"}, {"action", "x"}}).at("code") == "bad_action");
  CHECK(s.handle({{"type", "get_replay"}, {"log_id", "a"}}).at("code") == "no_logs");
  const json st = s.handle({{"type", "step"}, {"action", kScanLeft}});
  CHECK(st.at("type") == "state");
  const json res = s.handle({{"type", "step"}, {"action", kAnswerAction}});
  CHECK(res.at("type") == "result");
  CHECK(s.handle({{"type", "step"}, {"action", kScanLeft}}).at("code") == "episode_finished");
}

TEST_CASE("primitive control accepts low-level actions and answer choices") {
  const auto data = server_data();
  Session s(data);
  const json st = s.handle({{"type", "reset"}, {"item_id", first_test_item(*data)}, {"control", "primitive"}});
  const int choices = st.at("question").at("choices").size();
  CHECK(st.at("valid_actions").size() == static_cast<std::size_t>(kNumLowLevelActions + choices));
  CHECK(s.handle({{"type", "step"}, {"action", kNumLowLevelActions + choices}}).at("code") == "bad_action");
  CHECK(s.handle({{"type", "step"}, {"action", 1}}).at("type") == "state");
  const json res = s.handle({{"type", "step"}, {"action", kNumLowLevelActions}});
  CHECK(res.at("type") == "result");
  CHECK(res.at("answer") == 0);
}

TEST_CASE("framed TCP transport matches in-process sessions") {
  const auto log_dir = std::filesystem::temp_directory_path() / "iqa_test_server_logs";
  std::filesystem::remove_all(log_dir);
  const auto data = server_data(log_dir);
  EpisodeServer server(data);
  const int port = server.listen(0);
  std::thread loop([&] { server.run(); });

  std::vector<std::string> items;
  for (const auto& [id, it] : data->items)
    if (it.split == Split::Test) items.push_back(id);
  REQUIRE(items.size() >= 4);
  items.resize(4);

  std::vector<json> remote(items.size());
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < items.size(); ++i) {
    clients.emplace_back([&, i] {
      ProtocolClient c("127.0.0.1", port);
      remote[i] = play([&](const json& m) { return c.request(m); }, items[i]);
    });
  }
  for (auto& t : clients) t.join();

  for (std::size_t i = 0; i < items.size(); ++i) {
    Session local(server_data());
    const json here = play([&](const json& m) { return local.handle(m); }, items[i]);
    REQUIRE(remote[i].at("type") == "result");
    CHECK(remote[i].at("metrics") == here.at("metrics"));
    CHECK(remote[i].at("answer") == here.at("answer"));
    CHECK(remote[i].at("state").at("topdown_map") == here.at("state").at("topdown_map"));
    REQUIRE(remote[i].contains("log_id"));
    CHECK(replay_log(log_dir / (remote[i].at("log_id").get<std::string>() + ".jsonl.gz")).ok());
  }
  CHECK(server.completed().size() == items.size());

  ProtocolClient c("127.0.0.1", port);
  CHECK(c.request_raw("{oops").at("code") == "bad_json");
  const json replay =
      c.request({{"type", "get_replay"}, {"log_id", remote[0].at("log_id")}, {"from", 0}, {"count", 2}});
  CHECK(replay.at("type") == "replay");
  CHECK(replay.contains("header"));
  CHECK(replay.at("steps").size() <= 2);
  CHECK(c.request({{"type", "get_replay"}, {"log_id", "../etc/passwd"}}).at("code") == "bad_request");
  CHECK(c.request({{"type", "reset"}, {"item_id", items[0]}}).at("type") == "state");

  server.stop();
  loop.join();
  std::filesystem::remove_all(log_dir);
}

TEST_CASE("HTTP mode keys sessions by id") {
  EpisodeServer server(server_data());
  const std::string item = first_test_item(*server_data());
  const json st = server.handle_http({{"type", "reset"}, {"item_id", item}});
  REQUIRE(st.at("type") == "state");
  const std::string sid = st.at("session_id");
  const json next = server.handle_http({{"type", "step"}, {"action", kAnswerAction}, {"session_id", sid}});
  CHECK(next.at("type") == "result");
  CHECK(next.at("session_id") == sid);
  CHECK(server.handle_http({{"type", "step"}, {"action", 0}, {"session_id", "999"}}).at("code") == "unknown_session");
  CHECK(server.completed().size() == 1);
}
