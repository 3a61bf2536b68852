#include "iqa/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "iqa/room_io.hpp"
#include "iqa/trajectory_log.hpp"

namespace iqa {

using nlohmann::json;

namespace {

constexpr std::uint32_t kMaxFrame = 64u << 20;

bool write_all(int fd, const char* p, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w <= 0) return false;
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_all(int fd, char* p, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, p, n, 0);
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

json topdown_map(const Episode& ep) {
  const SpatialMemory& mem = ep.world().memory();
  const Scene& scene = ep.world().scene();
  const double tau = ep.options().answer.tau;
  json rows = json::array();
  json objects = json::array();
  for (int y = 0; y < mem.height(); ++y) {
    std::string row;
    for (int x = 0; x < mem.width(); ++x) {
      const Cell c{x, y};
      if (mem.at(c, mem.coverage_channel()) <= 0.0) {
        row.push_back('?');
        continue;
      }
      const int r = scene.receptacle_at(c);
      if (r >= 0) row.push_back(scene.receptacles[static_cast<std::size_t>(r)].is_open ? 'O' : 'R');
      else row.push_back(mem.at(c, mem.free_channel()) >= 0.5 ? '.' : '#');
      for (int k = 0; k < kNumObjectClasses; ++k) {
        if (mem.at(c, k) >= tau) objects.push_back({{"class", kObjectNames[static_cast<std::size_t>(k)]}, {"cell", cell_to_json(c)}});
      }
    }
    rows.push_back(row);
  }
  return {{"width", mem.width()},
          {"height", mem.height()},
          {"legend", {{"?", "unexplored"}, {".", "free"}, {"#", "blocked"}, {"R", "receptacle"}, {"O", "open receptacle"}}},
          {"rows", rows},
          {"objects", objects},
          {"coverage", coverage_fraction(mem)}};
}

json egocentric_view(const Episode& ep) {
  const Observation& obs = ep.world().last_observation();
  const Detections& det = ep.world().last_detections();
  json cells = json::array();
  for (const auto& vc : obs.cells) cells.push_back({{"cell", cell_to_json(vc.cell)}, {"free", vc.is_free}});
  json recs = json::array();
  for (const auto& r : obs.receptacles) {
    recs.push_back({{"class", kReceptacleNames[static_cast<std::size_t>(r.class_id)]},
                    {"cell", cell_to_json(r.cell)},
                    {"openable", r.openable},
                    {"open", r.is_open},
                    {"band", band_name(r.height_band)}});
  }
  json objs = json::array();
  for (const auto& d : det.items) {
    if (d.channel >= kNumObjectClasses) continue;
    objs.push_back({{"class", kObjectNames[static_cast<std::size_t>(d.channel)]}, {"cell", cell_to_json(d.cell)}});
  }
  return {{"pose", agent_to_json(obs.pose)}, {"cells", cells}, {"receptacles", recs}, {"detections", objs}};
}

}  // namespace

json error_message(const std::string& code, const std::string& message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

json record_summary_json(const EpisodeRecord& r) {
  return {{"item_id", r.item_id},
          {"config_id", r.config_id},
          {"split", split_name(r.split)},
          {"room_id", r.room_id},
          {"qtype", qtype_name(r.qtype)},
          {"agent", r.agent},
          {"control", r.control == ControlMode::Planner ? "planner" : "primitive"},
          {"answer", r.answer_given},
          {"ground_truth", r.ground_truth},
          {"correct", r.correct},
          {"planner_steps", r.planner_steps},
          {"primitive_steps", r.primitive_steps},
          {"invalid_commands", r.invalid_commands},
          {"total_return", r.total_return},
          {"detector_seed", r.detector_seed},
          {"agent_seed", r.agent_seed},
          {"final_digest", r.final_digest}};
}

Session::Session(std::shared_ptr<const ServerData> data, std::function<void(const EpisodeRecord&)> on_complete)
    : data_(std::move(data)), on_complete_(std::move(on_complete)) {}

json Session::handle(const json& request) {
  try {
    if (!request.is_object() || !request.contains("type") || !request.at("type").is_string())
      return error_message("bad_request", "message must be an object with a string field 'type'");
    const std::string type = request.at("type").get<std::string>();
    if (type == "reset") return reset(request);
    if (type == "step") return step(request);
    if (type == "get_replay") return replay(request);
    return error_message("unknown_type", "unsupported request type '" + type + "'");
  } catch (const json::exception& e) {
    return error_message("bad_request", e.what());
  } catch (const std::exception& e) {
    return error_message("internal", e.what());
  }
}

json Session::reset(const json& req) {
  if (!req.contains("item_id") || !req.at("item_id").is_string()) return error_message("bad_request", "reset needs item_id");
  const auto it = data_->items.find(req.at("item_id").get<std::string>());
  if (it == data_->items.end()) return error_message("unknown_item", "no item " + req.at("item_id").get<std::string>());
  const std::string control = req.value("control", "planner");
  if (control != "planner" && control != "primitive") return error_message("bad_request", "control must be planner or primitive");
  EpisodeOptions opts = data_->options.episode;
  opts.control = control == "planner" ? ControlMode::Planner : ControlMode::Primitive;
  opts.detector_seed = detector_seed_for(data_->options.seed, it->second.item_id);
  agent_ = req.value("agent", control == "primitive" ? "human" : "external");
  if (agent_ != "human" && agent_ != "external") return error_message("bad_request", "agent must be human or external");
  agent_seed_ = req.value("agent_seed", std::uint64_t{0});
  episode_ = std::make_unique<Episode>(room_for(data_->rooms, it->second.config.room_id), it->second, opts);
  reported_ = false;
  return state(0.0);
}

json Session::step(const json& req) {
  if (!episode_) return error_message("no_episode", "send reset first");
  if (episode_->done()) return error_message("episode_finished", "the episode has ended; send reset");
  if (!req.contains("action") || !req.at("action").is_number_integer())
    return error_message("bad_action", "action must be an integer index");
  const long action = req.at("action").get<long>();
  StepResult res;
  if (episode_->options().control == ControlMode::Planner) {
    if (action < 0 || action >= kNumPlannerActions)
      return error_message("bad_action", "planner action must be in [0, " + std::to_string(kNumPlannerActions) + ")");
    res = episode_->step(static_cast<int>(action));
  } else {
    const long limit = kNumLowLevelActions + episode_->question().num_choices();
    if (action < 0 || action >= limit)
      return error_message("bad_action", "primitive action must be in [0, " + std::to_string(limit) + ")");
    res = action < kNumLowLevelActions ? episode_->step_primitive(static_cast<int>(action))
                                       : episode_->answer_with(static_cast<int>(action - kNumLowLevelActions));
  }
  return res.done ? finish(res.reward) : state(res.reward);
}

json Session::replay(const json& req) const {
  if (data_->options.log_dir.empty()) return error_message("no_logs", "server runs without a log directory");
  if (!req.contains("log_id") || !req.at("log_id").is_string()) return error_message("bad_request", "get_replay needs log_id");
  const std::string id = req.at("log_id").get<std::string>();
  if (id.empty() || sanitize_log_id(id) != id) return error_message("bad_request", "invalid log_id");
  const auto path = data_->options.log_dir / (id + ".jsonl.gz");
  if (!std::filesystem::exists(path)) return error_message("unknown_log", "no log " + id);
  const EpisodeLog log = read_episode_log(path);
  const long from = std::max(0L, req.value("from", 0L));
  const long count = std::max(0L, req.value("count", static_cast<long>(log.steps.size())));
  json steps = json::array();
  for (long i = from; i < static_cast<long>(log.steps.size()) && i < from + count; ++i)
    steps.push_back(log.steps[static_cast<std::size_t>(i)]);
  json out = {{"type", "replay"},
              {"log_id", id},
              {"from", from},
              {"total_steps", log.steps.size()},
              {"steps", steps}};
  if (from == 0) out["header"] = log.header;
  if (from + count >= static_cast<long>(log.steps.size())) out["result"] = log.result;
  return out;
}

json Session::state(double last_reward) const {
  const Episode& ep = *episode_;
  json valid = json::array();
  if (ep.options().control == ControlMode::Planner) {
    for (bool v : ep.valid_mask()) valid.push_back(v);
  } else {
    for (bool v : ep.valid_primitive_mask()) valid.push_back(v);
    for (int c = 0; c < ep.question().num_choices(); ++c) valid.push_back(true);
  }
  return {{"type", "state"},
          {"question", question_to_json(ep.question())},
          {"control", ep.options().control == ControlMode::Planner ? "planner" : "primitive"},
          {"egocentric_view", egocentric_view(ep)},
          {"topdown_map", topdown_map(ep)},
          {"last_reward", last_reward},
          {"done", ep.done()},
          {"valid_actions", valid},
          {"step_counters",
           {{"planner_steps", ep.planner_steps()},
            {"primitive_steps", ep.world().primitive_steps()},
            {"invalid_commands", ep.invalid_commands()},
            {"total_return", ep.total_return()}}}};
}

json Session::finish(double last_reward) {
  const EpisodeRecord rec = episode_->record(agent_, agent_seed_);
  json out = {{"type", "result"},
              {"correct", rec.correct},
              {"answer", rec.answer_given},
              {"ground_truth", rec.ground_truth},
              {"last_reward", last_reward},
              {"metrics",
               {{"planner_steps", rec.planner_steps},
                {"primitive_steps", rec.primitive_steps},
                {"invalid_commands", rec.invalid_commands},
                {"total_return", rec.total_return}}},
              {"state", state(last_reward)}};
  if (!reported_) {
    reported_ = true;
    if (on_complete_) on_complete_(rec);
    if (!data_->options.log_dir.empty()) {
      const std::string id = sanitize_log_id(rec.agent + "_" + rec.item_id + "_" + std::to_string(rec.final_digest));
      write_episode_log(data_->options.log_dir / (id + ".jsonl.gz"), rec,
                        room_for(data_->rooms, episode_->item().config.room_id), episode_->item(), episode_->options(),
                        episode_->world().memory());
      out["log_id"] = id;
    }
  }
  return out;
}

bool write_frame(int fd, const std::string& payload) {
  const std::uint32_t n = htonl(static_cast<std::uint32_t>(payload.size()));
  char head[4];
  std::memcpy(head, &n, 4);
  return write_all(fd, head, 4) && write_all(fd, payload.data(), payload.size());
}

bool read_frame(int fd, std::string& payload) {
  char head[4];
  if (!read_all(fd, head, 4)) return false;
  std::uint32_t n = 0;
  std::memcpy(&n, head, 4);
  n = ntohl(n);
  if (n > kMaxFrame) return false;
  payload.assign(n, '\0');
  return n == 0 || read_all(fd, payload.data(), n);
}

EpisodeServer::EpisodeServer(std::shared_ptr<const ServerData> data) : data_(std::move(data)) {}

EpisodeServer::~EpisodeServer() {
  stop();
  while (live_connections_.load() > 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

int EpisodeServer::listen(int port, const std::string& host) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw Error("bad host " + host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw Error("bind failed on port " + std::to_string(port));
  if (::listen(listen_fd_, 16) != 0) throw Error("listen failed");
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void EpisodeServer::run() {
  while (!stopping_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_.load()) break;
      continue;
    }
    ++live_connections_;
    std::thread([this, fd] {
      serve_connection(fd);
      ::close(fd);
      --live_connections_;
    }).detach();
  }
}

void EpisodeServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void EpisodeServer::serve_connection(int fd) {
  Session session(data_, [this](const EpisodeRecord& r) { complete(r); });
  std::string payload;
  while (read_frame(fd, payload)) {
    json response;
    try {
      response = session.handle(json::parse(payload));
    } catch (const json::parse_error& e) {
      response = error_message("bad_json", e.what());
    }
    if (!write_frame(fd, response.dump())) break;
  }
}

void EpisodeServer::complete(const EpisodeRecord& r) {
  std::lock_guard lock(mu_);
  completed_.push_back(r);
  if (!data_->options.log_dir.empty()) {
    std::filesystem::create_directories(data_->options.log_dir);
    std::ofstream os(data_->options.log_dir / "records.jsonl", std::ios::app);
    os << record_summary_json(r).dump() << '\n';
  }
}

std::vector<EpisodeRecord> EpisodeServer::completed() const {
  std::lock_guard lock(mu_);
  return completed_;
}

json EpisodeServer::handle_http(const json& request) {
  Session* session = nullptr;
  std::string id;
  {
    std::lock_guard lock(mu_);
    if (request.is_object() && request.contains("session_id") && request.at("session_id").is_string()) {
      id = request.at("session_id").get<std::string>();
      const auto it = http_sessions_.find(id);
      if (it == http_sessions_.end()) return error_message("unknown_session", "no session " + id);
      session = it->second.get();
    } else {
      id = std::to_string(next_session_++);
      auto s = std::make_unique<Session>(data_, [this](const EpisodeRecord& r) { complete(r); });
      session = s.get();
      http_sessions_.emplace(id, std::move(s));
    }
  }
  json response = session->handle(request);
  response["session_id"] = id;
  return response;
}

void EpisodeServer::serve_http(int port, const std::string& host) {
  httplib::Server http;
  http.Post("/api", [this](const httplib::Request& req, httplib::Response& res) {
    json response;
    try {
      response = handle_http(json::parse(req.body));
    } catch (const json::parse_error& e) {
      response = error_message("bad_json", e.what());
    }
    res.set_content(response.dump(), "application/json");
  });
  if (!http.listen(host, port)) throw Error("cannot serve HTTP on port " + std::to_string(port));
}

ProtocolClient::ProtocolClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw Error("bad host " + host);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd_);
    throw Error("cannot connect to " + host + ":" + std::to_string(port));
  }
}

ProtocolClient::~ProtocolClient() {
  if (fd_ >= 0) ::close(fd_);
}

json ProtocolClient::request(const json& message) { return request_raw(message.dump()); }

json ProtocolClient::request_raw(const std::string& payload) {
  std::string reply;
  if (!write_frame(fd_, payload) || !read_frame(fd_, reply)) throw Error("connection closed");
  return json::parse(reply);
}

}  // namespace iqa
