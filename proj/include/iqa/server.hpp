#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "iqa/harness.hpp"

namespace iqa {

struct ServerOptions {
  EpisodeOptions episode;
  std::uint64_t seed = 0;
  std::filesystem::path log_dir;  // trajectory logs and records.jsonl; empty: keep records in memory only
};

// Immutable data shared by every session.
struct ServerData {
  RoomTable rooms;
  std::map<std::string, DatasetItem> items;
  std::map<std::string, Split> room_split;
  ServerOptions options;
};

nlohmann::json record_summary_json(const EpisodeRecord& r);

// One episode state machine. Every request yields exactly one response.
class Session {
 public:
  explicit Session(std::shared_ptr<const ServerData> data, std::function<void(const EpisodeRecord&)> on_complete = {});

  nlohmann::json handle(const nlohmann::json& request);

  bool active() const { return episode_ != nullptr; }
  const Episode* episode() const { return episode_.get(); }

 private:
  nlohmann::json reset(const nlohmann::json& req);
  nlohmann::json step(const nlohmann::json& req);
  nlohmann::json replay(const nlohmann::json& req) const;
  nlohmann::json state(double last_reward) const;
  nlohmann::json finish(double last_reward);

  std::shared_ptr<const ServerData> data_;
  std::function<void(const EpisodeRecord&)> on_complete_;
  std::unique_ptr<Episode> episode_;
  std::string agent_;
  std::uint64_t agent_seed_ = 0;
  bool reported_ = false;
};

nlohmann::json error_message(const std::string& code, const std::string& message);

// Length-prefixed JSON (4-byte big-endian size, then UTF-8 JSON) over TCP, one
// thread and one session per connection; plus an HTTP mode where each POST
// /api call carries one request and a session id.
class EpisodeServer {
 public:
  explicit EpisodeServer(std::shared_ptr<const ServerData> data);
  ~EpisodeServer();

  // Binds the framed TCP listener; port 0 picks a free port. Returns the bound port.
  int listen(int port, const std::string& host = "127.0.0.1");
  // Accept loop; returns after stop().
  void run();
  void stop();

  // Blocking HTTP service (one request per call).
  void serve_http(int port, const std::string& host = "127.0.0.1");
  // Handles one HTTP-mode request body; exposed for tests.
  nlohmann::json handle_http(const nlohmann::json& request);

  std::vector<EpisodeRecord> completed() const;

 private:
  void serve_connection(int fd);
  void complete(const EpisodeRecord& r);

  std::shared_ptr<const ServerData> data_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::atomic<int> live_connections_{0};
  mutable std::mutex mu_;
  std::vector<EpisodeRecord> completed_;
  std::map<std::string, std::unique_ptr<Session>> http_sessions_;
  std::uint64_t next_session_ = 1;
};

// Blocking framed-protocol client.
class ProtocolClient {
 public:
  ProtocolClient(const std::string& host, int port);
  ~ProtocolClient();
  ProtocolClient(const ProtocolClient&) = delete;
  ProtocolClient& operator=(const ProtocolClient&) = delete;

  nlohmann::json request(const nlohmann::json& message);
  // Sends raw bytes as one frame (for malformed-input tests).
  nlohmann::json request_raw(const std::string& payload);

 private:
  int fd_ = -1;
};

bool write_frame(int fd, const std::string& payload);
bool read_frame(int fd, std::string& payload);

}  // namespace iqa
