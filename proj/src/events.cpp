#include "audmem/events.hpp"

#include "audmem/audio.hpp"
#include "audmem/error.hpp"

#include <chrono>

namespace audmem {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::session_started: return "session_started";
    case EventKind::clip_started: return "clip_started";
    case EventKind::click: return "click";
    case EventKind::session_finished: return "session_finished";
    case EventKind::survey_submitted: return "survey_submitted";
  }
  return "session_started";
}

EventKind parse_event_kind(const std::string& s) {
  for (auto k : {EventKind::session_started, EventKind::clip_started, EventKind::click, EventKind::session_finished,
                 EventKind::survey_submitted}) {
    if (to_string(k) == s) return k;
  }
  throw ReplayError("unknown event kind '" + s + "'");
}

std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::active: return "active";
    case SessionStatus::finished: return "finished";
    case SessionStatus::abandoned: return "abandoned";
  }
  return "active";
}

std::string to_jsonl(const EventRecord& e) {
  const nlohmann::json j = {{"seq", e.seq},
                            {"ts", e.ts},
                            {"kind", to_string(e.kind)},
                            {"session_id", e.session_id},
                            {"payload", e.payload}};
  return j.dump();
}

EventRecord parse_event(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw ReplayError(std::string("malformed event line: ") + ex.what());
  }
  EventRecord e;
  try {
    e.seq = j.at("seq").get<std::int64_t>();
    e.ts = j.at("ts").get<std::int64_t>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.session_id = j.at("session_id").get<std::string>();
    e.payload = j.value("payload", nlohmann::json::object());
  } catch (const nlohmann::json::exception& ex) {
    throw ReplayError(std::string("event missing field: ") + ex.what());
  }
  return e;
}

std::vector<EventRecord> parse_events(std::string_view text) {
  std::vector<EventRecord> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) out.push_back(parse_event(line));
    start = end + 1;
  }
  return out;
}

std::vector<EventRecord> read_events(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return {};
  const auto bytes = read_file_bytes(path);
  return parse_events(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_events(const std::filesystem::path& path, std::span<const EventRecord> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& e : events) out << to_jsonl(e) << '\n';
}

std::int64_t now_utc_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  const auto existing = read_events(path_);
  if (!existing.empty()) last_seq_ = existing.back().seq;
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw ConfigError("cannot open event log " + path_.string());
}

EventRecord EventLog::append(EventKind kind, const std::string& session_id, nlohmann::json payload) {
  std::lock_guard lock(mutex_);
  EventRecord e;
  e.seq = ++last_seq_;
  e.ts = now_utc_ms();
  e.kind = kind;
  e.session_id = session_id;
  e.payload = std::move(payload);
  out_ << to_jsonl(e) << '\n';
  out_.flush();
  return e;
}

std::int64_t EventLog::last_seq() const {
  std::lock_guard lock(mutex_);
  return last_seq_;
}

int display_score(const SessionPlan& plan, const SessionLog& log) {
  int hits = 0, false_alarms = 0;
  for (int pos : log.clicks) {
    if (pos < 0 || pos >= plan.length()) continue;
    if (is_first_presentation(plan.slots[static_cast<std::size_t>(pos)].role)) {
      ++false_alarms;
    } else {
      ++hits;
    }
  }
  return std::max(0, hits - false_alarms);
}

ReplayResult replay_events(std::span<const EventRecord> events) {
  ReplayResult r;
  auto fail = [](const EventRecord& e, const std::string& why) {
    throw ReplayError("seq " + std::to_string(e.seq) + ": " + why);
  };
  for (const auto& e : events) {
    if (e.seq <= r.last_seq) fail(e, "sequence number does not increase (previous " + std::to_string(r.last_seq) + ")");
    r.last_seq = e.seq;
    try {
      if (e.kind == EventKind::session_started) {
        if (r.sessions.count(e.session_id)) fail(e, "session '" + e.session_id + "' started twice");
        SessionState s;
        s.plan = e.payload.at("plan").get<SessionPlan>();
        s.log.session_id = e.session_id;
        s.log.worker_id = e.payload.at("worker_id").get<std::string>();
        auto& w = r.workers[s.log.worker_id];
        ++w.sessions;
        for (const auto& t : s.plan.target_ids()) w.targets.insert(t);
        r.sessions.emplace(e.session_id, std::move(s));
        continue;
      }
      const auto it = r.sessions.find(e.session_id);
      if (it == r.sessions.end()) fail(e, "event for unknown session '" + e.session_id + "'");
      SessionState& s = it->second;
      switch (e.kind) {
        case EventKind::clip_started: {
          const int pos = e.payload.at("position").get<int>();
          if (s.status != SessionStatus::active) fail(e, "clip after session end");
          if (pos != s.cursor || pos >= s.plan.length()) fail(e, "clip position out of order");
          ++s.cursor;
          break;
        }
        case EventKind::click: {
          const int pos = e.payload.at("position").get<int>();
          if (s.status != SessionStatus::active) fail(e, "click after session end");
          if (pos < 0 || pos >= s.cursor) fail(e, "click on unserved position");
          if (s.log.clicks.insert(pos).second && e.payload.contains("latency_ms")) {
            s.log.latency_ms[pos] = e.payload.at("latency_ms").get<double>();
          }
          break;
        }
        case EventKind::session_finished: {
          if (s.status != SessionStatus::active) fail(e, "session finished twice");
          if (s.cursor != s.plan.length()) fail(e, "finish with unserved slots");
          s.status = SessionStatus::finished;
          s.log.completed = true;
          ValidationResult v;
          v.vigilance_score = e.payload.at("vigilance_score").get<double>();
          v.false_positive_rate = e.payload.at("false_positive_rate").get<double>();
          v.accepted = e.payload.at("accepted").get<bool>();
          s.reported = v;
          break;
        }
        case EventKind::survey_submitted:
          s.survey = e.payload.at("survey");
          break;
        case EventKind::session_started:
          break;
      }
    } catch (const nlohmann::json::exception& ex) {
      fail(e, std::string("malformed payload: ") + ex.what());
    } catch (const LogMismatch& ex) {
      fail(e, ex.what());
    }
  }
  return r;
}

std::vector<SessionRecord> finished_records(const ReplayResult& replay) {
  std::vector<SessionRecord> out;
  for (const auto& [id, s] : replay.sessions) {
    if (s.status == SessionStatus::finished) out.push_back({s.plan, s.log});
  }
  return out;
}

std::vector<EventRecord> records_to_events(std::span<const SessionRecord> records, const PlanConfig& cfg,
                                           std::int64_t start_ts) {
  std::vector<EventRecord> out;
  auto emit = [&](EventKind kind, const std::string& sid, nlohmann::json payload) {
    EventRecord e;
    e.seq = static_cast<std::int64_t>(out.size()) + 1;
    e.ts = start_ts + e.seq;
    e.kind = kind;
    e.session_id = sid;
    e.payload = std::move(payload);
    out.push_back(std::move(e));
  };
  for (const auto& rec : records) {
    const std::string& sid = rec.plan.session_id;
    emit(EventKind::session_started, sid, {{"worker_id", rec.log.worker_id}, {"plan", rec.plan}});
    for (const auto& slot : rec.plan.slots) {
      emit(EventKind::clip_started, sid, {{"position", slot.position}});
      if (rec.log.clicks.count(slot.position)) {
        const auto lat = rec.log.latency_ms.find(slot.position);
        emit(EventKind::click, sid,
             {{"position", slot.position}, {"latency_ms", lat != rec.log.latency_ms.end() ? lat->second : 0.0}});
      }
    }
    if (!rec.log.completed) continue;
    const ValidationResult v = validate_session(rec.plan, rec.log, cfg);
    nlohmann::json payload = v;
    payload["display_score"] = display_score(rec.plan, rec.log);
    emit(EventKind::session_finished, sid, std::move(payload));
  }
  return out;
}

}  // namespace audmem
