#pragma once

#include "audmem/events.hpp"
#include "audmem/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

namespace audmem {

/// Transport-neutral response.
struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

using ClipSource = std::function<std::vector<std::uint8_t>(const std::string& sound_id)>;

/// Reads `sound_id,path` rows (header required); relative paths resolve
/// against `audio_dir`.
std::map<std::string, std::filesystem::path> read_pool_manifest(const std::filesystem::path& manifest,
                                                                const std::filesystem::path& audio_dir);

/// Serves the bytes of each file in `paths`.
ClipSource file_clip_source(std::map<std::string, std::filesystem::path> paths);

struct ServiceConfig {
  std::vector<std::string> pool;
  ClipSource clips;
  std::filesystem::path event_log;
  PlanConfig plan;
  std::uint64_t seed = 0;
};

/// Experiment game backend. State is rebuilt from the event log at
/// construction, and every accepted request appends to it.
class ExperimentService {
 public:
  explicit ExperimentService(ServiceConfig cfg);

  ApiResponse start_session(const std::string& body);
  ApiResponse get_clip(const std::string& session_id, int position);
  ApiResponse click(const std::string& session_id, const std::string& body);
  ApiResponse finish(const std::string& session_id);
  ApiResponse submit_survey(const std::string& session_id, const std::string& body);
  ApiResponse headphone_check() const;
  /// Per-sound scores over accepted finished sessions.
  ApiResponse scores() const;

  std::vector<SessionRecord> finished() const;

 private:
  struct Live {
    std::mutex mutex;
    SessionState state;
  };
  std::shared_ptr<Live> find(const std::string& session_id) const;

  ServiceConfig cfg_;
  EventLog log_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::mutex workers_mutex_;  ///< serializes plan issuance
  std::map<std::string, WorkerHistory> workers_;
  std::uint64_t issued_ = 0;
};

class HttpServer {
 public:
  explicit HttpServer(ExperimentService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace audmem
