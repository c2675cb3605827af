#pragma once

#include "audmem/experiment.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace audmem {

enum class EventKind { session_started, clip_started, click, session_finished, survey_submitted };

std::string to_string(EventKind k);
EventKind parse_event_kind(const std::string& s);

/// One line of the append-only log.
struct EventRecord {
  std::int64_t seq = 0;
  std::int64_t ts = 0;  ///< UTC milliseconds
  EventKind kind = EventKind::session_started;
  std::string session_id;
  nlohmann::json payload = nlohmann::json::object();
};

std::string to_jsonl(const EventRecord& e);
EventRecord parse_event(std::string_view line);
std::vector<EventRecord> parse_events(std::string_view text);
std::vector<EventRecord> read_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, std::span<const EventRecord> events);

std::int64_t now_utc_ms();

/// Serialized appender; seq continues after the last record already on disk.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);

  EventRecord append(EventKind kind, const std::string& session_id, nlohmann::json payload);
  std::int64_t last_seq() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::int64_t last_seq_ = 0;
};

enum class SessionStatus { active, finished, abandoned };
std::string to_string(SessionStatus s);

struct SessionState {
  SessionPlan plan;
  SessionLog log;  ///< clicks and latencies received so far
  int cursor = 0;  ///< next position to serve
  SessionStatus status = SessionStatus::active;
  std::optional<ValidationResult> reported;  ///< result logged at finish
  std::optional<nlohmann::json> survey;
};

struct ReplayResult {
  std::map<std::string, SessionState> sessions;
  std::map<std::string, WorkerHistory> workers;
  std::int64_t last_seq = 0;
};

/// Rebuilds session state. Throws ReplayError on seq regression, orphan
/// events or transitions the live service would have refused.
ReplayResult replay_events(std::span<const EventRecord> events);

/// Finished sessions as plan + log pairs, ordered by session id.
std::vector<SessionRecord> finished_records(const ReplayResult& replay);

/// Shown to participants at the end of a round: hits on repeats minus clicks
/// on first presentations, floored at 0.
int display_score(const SessionPlan& plan, const SessionLog& log);

/// Event stream a live session with this plan and log would have produced.
std::vector<EventRecord> records_to_events(std::span<const SessionRecord> records, const PlanConfig& cfg = {},
                                           std::int64_t start_ts = 0);

}  // namespace audmem
