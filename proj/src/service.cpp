#include "audmem/service.hpp"

#include "audmem/audio.hpp"
#include "audmem/csv.hpp"
#include "audmem/error.hpp"
#include "audmem/simulant.hpp"

#include <cstdio>

namespace audmem {

namespace {

using nlohmann::json;

ApiResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

ApiResponse error_response(int status, const std::string& kind, const std::string& message) {
  return json_response(status, {{"error", kind}, {"message", message}});
}

std::optional<json> parse_body(const std::string& body) {
  try {
    return json::parse(body.empty() ? std::string("{}") : body);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::string session_name(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sess-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

json score_json(const SoundScores& scores) {
  json sounds = json::object();
  for (const auto& [id, s] : scores) {
    sounds[id] = {{"M", s.m},
                  {"C10", s.c10},
                  {"normalized", s.normalized},
                  {"n_target_appearances", s.n_target_appearances},
                  {"n_last10_appearances", s.n_last10_appearances}};
  }
  return sounds;
}

}  // namespace

std::map<std::string, std::filesystem::path> read_pool_manifest(const std::filesystem::path& manifest,
                                                                const std::filesystem::path& audio_dir) {
  const auto rows = csv::read_file(manifest);
  if (rows.empty() || rows[0].size() < 2) throw SchemaError("pool manifest needs a sound_id,path header");
  std::map<std::string, std::filesystem::path> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2 || rows[i][0].empty()) continue;
    std::filesystem::path p = rows[i][1];
    if (p.is_relative() && !audio_dir.empty()) p = audio_dir / p;
    if (!out.emplace(rows[i][0], p).second) throw DuplicateKey("sound '" + rows[i][0] + "' listed twice");
  }
  return out;
}

ClipSource file_clip_source(std::map<std::string, std::filesystem::path> paths) {
  return [paths = std::move(paths)](const std::string& id) {
    const auto it = paths.find(id);
    if (it == paths.end()) throw DecodeError("no audio file for sound '" + id + "'");
    return read_file_bytes(it->second);
  };
}

ExperimentService::ExperimentService(ServiceConfig cfg) : cfg_(std::move(cfg)), log_(cfg_.event_log) {
  const auto events = read_events(cfg_.event_log);
  ReplayResult replay = replay_events(events);
  workers_ = std::move(replay.workers);
  for (auto& [id, state] : replay.sessions) {
    auto live = std::make_shared<Live>();
    live->state = std::move(state);
    sessions_.emplace(id, std::move(live));
  }
  issued_ = sessions_.size();
}

std::shared_ptr<ExperimentService::Live> ExperimentService::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

ApiResponse ExperimentService::start_session(const std::string& body) {
  const auto req = parse_body(body);
  if (!req || !req->is_object() || !req->contains("worker_id") || !(*req)["worker_id"].is_string() ||
      (*req)["worker_id"].get<std::string>().empty()) {
    return error_response(400, "BadRequest", "body must carry a non-empty worker_id");
  }
  const std::string worker = (*req)["worker_id"].get<std::string>();

  std::lock_guard lock(workers_mutex_);
  WorkerHistory& history = workers_[worker];
  const std::string id = session_name(issued_ + 1);
  auto live = std::make_shared<Live>();
  try {
    live->state.plan = plan_session(cfg_.pool, history, derive_seed(cfg_.seed, issued_), cfg_.plan, id);
  } catch (const WorkerExhausted& e) {
    return error_response(409, e.kind(), "worker has reached the round limit");
  } catch (const PlanInfeasible& e) {
    return error_response(503, e.kind(), "no session plan available");
  }
  ++issued_;
  live->state.log.session_id = id;
  live->state.log.worker_id = worker;
  ++history.sessions;
  for (const auto& t : live->state.plan.target_ids()) history.targets.insert(t);
  log_.append(EventKind::session_started, id, {{"worker_id", worker}, {"plan", live->state.plan}});
  const int n_slots = live->state.plan.length();
  {
    std::unique_lock slock(sessions_mutex_);
    sessions_.emplace(id, std::move(live));
  }
  return json_response(200, {{"session_id", id}, {"n_slots", n_slots}, {"round", history.sessions}});
}

ApiResponse ExperimentService::get_clip(const std::string& session_id, int position) {
  const auto live = find(session_id);
  if (!live) return error_response(404, "NotFound", "unknown session");
  std::lock_guard lock(live->mutex);
  SessionState& s = live->state;
  if (s.status != SessionStatus::active) return error_response(409, "Conflict", "session is not active");
  if (position != s.cursor) {
    return error_response(409, "Conflict", "clips must be requested in order; next is " + std::to_string(s.cursor));
  }
  std::vector<std::uint8_t> bytes;
  try {
    bytes = cfg_.clips(s.plan.slots[static_cast<std::size_t>(position)].sound_id);
  } catch (const std::exception&) {
    return error_response(500, "ClipUnavailable", "audio for this position could not be loaded");
  }
  log_.append(EventKind::clip_started, session_id, {{"position", position}});
  ++s.cursor;
  return {200, "audio/wav", std::string(bytes.begin(), bytes.end())};
}

ApiResponse ExperimentService::click(const std::string& session_id, const std::string& body) {
  const auto live = find(session_id);
  if (!live) return error_response(404, "NotFound", "unknown session");
  const auto req = parse_body(body);
  if (!req || !req->is_object() || !req->contains("position") || !(*req)["position"].is_number_integer()) {
    return error_response(400, "BadRequest", "body must carry an integer position");
  }
  const int position = (*req)["position"].get<int>();
  double latency = 0.0;
  if (req->contains("latency_ms")) {
    if (!(*req)["latency_ms"].is_number()) return error_response(400, "BadRequest", "latency_ms must be a number");
    latency = (*req)["latency_ms"].get<double>();
  }

  std::lock_guard lock(live->mutex);
  SessionState& s = live->state;
  if (s.status != SessionStatus::active) return error_response(409, "Conflict", "session is not active");
  if (position < 0 || position >= s.cursor) return error_response(400, "BadRequest", "position has not been served");
  if (s.log.clicks.count(position)) return json_response(200, {{"recorded", false}});
  log_.append(EventKind::click, session_id, {{"position", position}, {"latency_ms", latency}});
  s.log.clicks.insert(position);
  s.log.latency_ms[position] = latency;
  return json_response(200, {{"recorded", true}});
}

ApiResponse ExperimentService::finish(const std::string& session_id) {
  const auto live = find(session_id);
  if (!live) return error_response(404, "NotFound", "unknown session");
  std::lock_guard lock(live->mutex);
  SessionState& s = live->state;
  if (s.status != SessionStatus::active) return error_response(409, "Conflict", "session is not active");
  if (s.cursor < s.plan.length()) {
    return json_response(409, {{"error", "Conflict"},
                               {"message", "slots remain unserved"},
                               {"unserved", s.plan.length() - s.cursor}});
  }
  const ValidationResult v = validate_session(s.plan, s.log, cfg_.plan);
  json result = v;
  result["display_score"] = display_score(s.plan, s.log);
  log_.append(EventKind::session_finished, session_id, result);
  s.status = SessionStatus::finished;
  s.log.completed = true;
  s.reported = v;
  return json_response(200, result);
}

ApiResponse ExperimentService::submit_survey(const std::string& session_id, const std::string& body) {
  const auto live = find(session_id);
  if (!live) return error_response(404, "NotFound", "unknown session");
  const auto req = parse_body(body);
  if (!req || !req->is_object()) return error_response(400, "BadRequest", "survey must be a JSON object");
  std::lock_guard lock(live->mutex);
  log_.append(EventKind::survey_submitted, session_id, {{"survey", *req}});
  live->state.survey = *req;
  return json_response(200, {{"recorded", true}});
}

ApiResponse ExperimentService::headphone_check() const {
  return json_response(200, {{"pass", true}, {"experimental", true}, {"note", "stub: no screening is performed"}});
}

std::vector<SessionRecord> ExperimentService::finished() const {
  std::vector<std::shared_ptr<Live>> all;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, live] : sessions_) all.push_back(live);
  }
  std::vector<SessionRecord> out;
  for (const auto& live : all) {
    std::lock_guard lock(live->mutex);
    if (live->state.status == SessionStatus::finished) out.push_back({live->state.plan, live->state.log});
  }
  return out;
}

ApiResponse ExperimentService::scores() const {
  const auto records = finished();
  const auto accepted = accepted_sessions(records, cfg_.plan);
  return json_response(200, {{"n_finished", records.size()},
                             {"n_accepted", accepted.size()},
                             {"sounds", score_json(score_sounds(accepted))}});
}

}  // namespace audmem
