#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace audmem {

enum class SlotRole { target_first, target_second, vigilance_first, vigilance_second, filler };

std::string to_string(SlotRole role);
SlotRole parse_role(const std::string& s);

/// True for slots that are a sound's first appearance in the session.
constexpr bool is_first_presentation(SlotRole r) {
  return r == SlotRole::target_first || r == SlotRole::vigilance_first || r == SlotRole::filler;
}

struct Slot {
  int position = 0;
  std::string sound_id;
  SlotRole role = SlotRole::filler;
};

struct SessionPlan {
  std::string session_id;
  std::vector<Slot> slots;  ///< slots[i].position == i
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(slots.size()); }
  std::vector<std::string> target_ids() const;
};

struct SessionLog {
  std::string session_id;
  std::string worker_id;
  std::set<int> clicks;                ///< clicked slot positions
  std::map<int, double> latency_ms;    ///< optional per-click latency
  bool completed = false;
};

struct ValidationResult {
  double vigilance_score = 0.0;
  double false_positive_rate = 0.0;
  bool accepted = false;

  friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

/// A plan with the participant's responses.
struct SessionRecord {
  SessionPlan plan;
  SessionLog log;
};

/// Game protocol parameters.
struct PlanConfig {
  int n_targets = 0;             ///< 0 draws 1 or 2 per session
  int n_vigilance = 20;
  int target_intervening = 60;   ///< sounds between target presentations
  int vigilance_min_intervening = 2;
  int vigilance_max_intervening = 3;
  int min_length = 68;
  int max_length = 72;
  int max_rounds = 8;
  int min_pool = 70;
  int max_attempts = 500;
  double min_vigilance = 0.6;    ///< accepted iff vigilance > this
  double max_false_positive = 0.4;  ///< accepted iff false positives < this
};

/// Previous rounds of one worker.
struct WorkerHistory {
  int sessions = 0;
  std::set<std::string> targets;
};

/// Throws PlanInfeasible or WorkerExhausted. Deterministic given
/// (pool order, history, seed).
SessionPlan plan_session(std::span<const std::string> pool, const WorkerHistory& history,
                         std::uint64_t seed, const PlanConfig& cfg = {}, std::string session_id = {});

/// Throws LogMismatch when a click lies outside the plan.
ValidationResult validate_session(const SessionPlan& plan, const SessionLog& log,
                                  const PlanConfig& cfg = {});

struct SoundScore {
  double m = 0.0;           ///< NaN when never a target
  double c10 = 0.0;         ///< NaN when never a late first presentation
  double normalized = 0.0;  ///< m - c10, NaN unless both defined
  int n_target_appearances = 0;
  int n_target_hits = 0;
  int n_last10_appearances = 0;
  int n_last10_clicks = 0;
};

using SoundScores = std::map<std::string, SoundScore>;

/// Aggregates every record given; the caller filters to accepted sessions.
SoundScores score_sounds(std::span<const SessionRecord> records);

std::vector<SessionRecord> accepted_sessions(std::span<const SessionRecord> records,
                                             const PlanConfig& cfg = {});

struct ReliabilityOptions {
  int n_splits = 5;
  std::uint64_t seed = 0;
  bool duplicate_into_both = false;  ///< degenerate test hook: both halves see every session
};

struct ReliabilityResult {
  std::vector<double> memorability_rho;  ///< per split, normalized score M - C10
  std::vector<double> confusability_rho; ///< per split, C10
  double mean_memorability = 0.0;
  double mean_confusability = 0.0;
};

/// Split-half ranking by worker. Throws NotSplittable with fewer than 2 workers.
ReliabilityResult split_rank_reliability(std::span<const SessionRecord> records,
                                         const ReliabilityOptions& opt = {});

std::string scores_to_csv(const SoundScores& scores);
SoundScores scores_from_csv(std::string_view text);

void to_json(nlohmann::json& j, const Slot& s);
void from_json(const nlohmann::json& j, Slot& s);
void to_json(nlohmann::json& j, const SessionPlan& p);
void from_json(const nlohmann::json& j, SessionPlan& p);
void to_json(nlohmann::json& j, const SessionLog& l);
void from_json(const nlohmann::json& j, SessionLog& l);
void to_json(nlohmann::json& j, const ValidationResult& v);

}  // namespace audmem
