#include "audmem/experiment.hpp"

#include "audmem/csv.hpp"
#include "audmem/error.hpp"
#include "audmem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace audmem {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(SlotRole role) {
  switch (role) {
    case SlotRole::target_first: return "target_first";
    case SlotRole::target_second: return "target_second";
    case SlotRole::vigilance_first: return "vigilance_first";
    case SlotRole::vigilance_second: return "vigilance_second";
    case SlotRole::filler: return "filler";
  }
  return "filler";
}

SlotRole parse_role(const std::string& s) {
  for (SlotRole r : {SlotRole::target_first, SlotRole::target_second, SlotRole::vigilance_first,
                     SlotRole::vigilance_second, SlotRole::filler}) {
    if (to_string(r) == s) return r;
  }
  throw LogMismatch("unknown slot role " + s);
}

std::vector<std::string> SessionPlan::target_ids() const {
  std::vector<std::string> out;
  for (const auto& s : slots) {
    if (s.role == SlotRole::target_first) out.push_back(s.sound_id);
  }
  return out;
}

SessionPlan plan_session(std::span<const std::string> pool, const WorkerHistory& history,
                         std::uint64_t seed, const PlanConfig& cfg, std::string session_id) {
  if (history.sessions >= cfg.max_rounds) {
    throw WorkerExhausted("worker already played " + std::to_string(history.sessions) + " rounds");
  }
  std::vector<std::string> distinct(pool.begin(), pool.end());
  {
    std::vector<std::string> sorted = distinct;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw PlanInfeasible("pool contains duplicate sound ids");
    }
  }
  if (static_cast<int>(distinct.size()) < cfg.min_pool) {
    throw PlanInfeasible("pool has " + std::to_string(distinct.size()) + " sounds, need " +
                         std::to_string(cfg.min_pool));
  }

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  const int length = uniform(cfg.min_length, cfg.max_length);
  const int n_targets = cfg.n_targets > 0 ? cfg.n_targets : uniform(1, 2);
  const int target_delta = cfg.target_intervening + 1;
  const int latest_first = length - 1 - target_delta;
  if (latest_first + 1 < n_targets) throw PlanInfeasible("session too short for target spacing");

  std::vector<std::string> eligible;
  for (const auto& id : distinct) {
    if (!history.targets.count(id)) eligible.push_back(id);
  }
  if (static_cast<int>(eligible.size()) < n_targets) {
    throw PlanInfeasible("no eligible target sounds left for this worker");
  }
  const int n_fillers = length - 2 * n_targets - 2 * cfg.n_vigilance;
  if (n_fillers < 0) throw PlanInfeasible("length too short for the requested pairs");
  if (static_cast<int>(distinct.size()) < n_targets + cfg.n_vigilance + n_fillers) {
    throw PlanInfeasible("pool too small for one session");
  }

  // Target positions.
  std::vector<int> firsts(static_cast<std::size_t>(latest_first + 1));
  std::iota(firsts.begin(), firsts.end(), 0);
  std::shuffle(firsts.begin(), firsts.end(), rng);
  firsts.resize(static_cast<std::size_t>(n_targets));
  std::sort(firsts.begin(), firsts.end());

  std::vector<std::optional<SlotRole>> roles(static_cast<std::size_t>(length));
  std::vector<int> pair_of(static_cast<std::size_t>(length), -1);
  for (int i = 0; i < n_targets; ++i) {
    const int p = firsts[static_cast<std::size_t>(i)];
    roles[static_cast<std::size_t>(p)] = SlotRole::target_first;
    roles[static_cast<std::size_t>(p + target_delta)] = SlotRole::target_second;
    pair_of[static_cast<std::size_t>(p)] = pair_of[static_cast<std::size_t>(p + target_delta)] = i;
  }

  // Vigilance pairs: randomized placement with restarts.
  const int dmin = cfg.vigilance_min_intervening + 1;
  const int dmax = cfg.vigilance_max_intervening + 1;
  bool placed = false;
  for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
    auto trial_roles = roles;
    auto trial_pairs = pair_of;
    placed = true;
    for (int v = 0; v < cfg.n_vigilance; ++v) {
      std::vector<std::pair<int, int>> candidates;
      for (int p = 0; p < length; ++p) {
        if (trial_roles[static_cast<std::size_t>(p)]) continue;
        for (int d = dmin; d <= dmax; ++d) {
          if (p + d < length && !trial_roles[static_cast<std::size_t>(p + d)]) candidates.emplace_back(p, d);
        }
      }
      if (candidates.empty()) {
        placed = false;
        break;
      }
      const auto [p, d] = candidates[static_cast<std::size_t>(uniform(0, static_cast<int>(candidates.size()) - 1))];
      trial_roles[static_cast<std::size_t>(p)] = SlotRole::vigilance_first;
      trial_roles[static_cast<std::size_t>(p + d)] = SlotRole::vigilance_second;
      trial_pairs[static_cast<std::size_t>(p)] = trial_pairs[static_cast<std::size_t>(p + d)] = n_targets + v;
    }
    if (placed) {
      roles = std::move(trial_roles);
      pair_of = std::move(trial_pairs);
    }
  }
  if (!placed) throw PlanInfeasible("could not place vigilance pairs");

  // Sound assignment: targets from eligible, everything else from the rest.
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::vector<std::string> targets(eligible.begin(), eligible.begin() + n_targets);
  std::vector<std::string> others;
  for (const auto& id : distinct) {
    if (std::find(targets.begin(), targets.end(), id) == targets.end()) others.push_back(id);
  }
  std::shuffle(others.begin(), others.end(), rng);

  SessionPlan plan;
  plan.session_id = std::move(session_id);
  plan.seed = seed;
  plan.slots.resize(static_cast<std::size_t>(length));
  std::size_t next_other = 0;
  std::vector<std::string> pair_sound(static_cast<std::size_t>(n_targets + cfg.n_vigilance));
  for (int i = 0; i < n_targets; ++i) pair_sound[static_cast<std::size_t>(i)] = targets[static_cast<std::size_t>(i)];
  for (int p = 0; p < length; ++p) {
    auto& slot = plan.slots[static_cast<std::size_t>(p)];
    slot.position = p;
    slot.role = roles[static_cast<std::size_t>(p)].value_or(SlotRole::filler);
    const int pair = pair_of[static_cast<std::size_t>(p)];
    if (pair < 0) {
      slot.sound_id = others[next_other++];
    } else {
      auto& sound = pair_sound[static_cast<std::size_t>(pair)];
      if (sound.empty()) sound = others[next_other++];
      slot.sound_id = sound;
    }
  }
  return plan;
}

ValidationResult validate_session(const SessionPlan& plan, const SessionLog& log, const PlanConfig& cfg) {
  if (!log.session_id.empty() && !plan.session_id.empty() && log.session_id != plan.session_id) {
    throw LogMismatch("log session " + log.session_id + " does not match plan " + plan.session_id);
  }
  for (int c : log.clicks) {
    if (c < 0 || c >= plan.length()) throw LogMismatch("click position " + std::to_string(c) + " outside plan");
  }
  int vig_total = 0, vig_hit = 0, first_total = 0, first_click = 0;
  for (const auto& s : plan.slots) {
    const bool clicked = log.clicks.count(s.position) > 0;
    if (s.role == SlotRole::vigilance_second) {
      ++vig_total;
      vig_hit += clicked;
    } else if (is_first_presentation(s.role)) {
      ++first_total;
      first_click += clicked;
    }
  }
  ValidationResult v;
  v.vigilance_score = vig_total ? static_cast<double>(vig_hit) / vig_total : 0.0;
  v.false_positive_rate = first_total ? static_cast<double>(first_click) / first_total : 0.0;
  v.accepted = v.vigilance_score > cfg.min_vigilance && v.false_positive_rate < cfg.max_false_positive;
  return v;
}

SoundScores score_sounds(std::span<const SessionRecord> records) {
  SoundScores scores;
  for (const auto& rec : records) {
    const int last10_start = rec.plan.length() - 10;
    for (const auto& s : rec.plan.slots) {
      const bool clicked = rec.log.clicks.count(s.position) > 0;
      if (s.role == SlotRole::target_second) {
        auto& sc = scores[s.sound_id];
        ++sc.n_target_appearances;
        sc.n_target_hits += clicked;
      } else if (is_first_presentation(s.role) && s.position >= last10_start) {
        auto& sc = scores[s.sound_id];
        ++sc.n_last10_appearances;
        sc.n_last10_clicks += clicked;
      }
    }
  }
  for (auto& [_, sc] : scores) {
    sc.m = sc.n_target_appearances ? static_cast<double>(sc.n_target_hits) / sc.n_target_appearances : kNaN;
    sc.c10 = sc.n_last10_appearances ? static_cast<double>(sc.n_last10_clicks) / sc.n_last10_appearances : kNaN;
    sc.normalized = sc.m - sc.c10;  // NaN propagates
  }
  return scores;
}

std::vector<SessionRecord> accepted_sessions(std::span<const SessionRecord> records, const PlanConfig& cfg) {
  std::vector<SessionRecord> out;
  for (const auto& r : records) {
    if (validate_session(r.plan, r.log, cfg).accepted) out.push_back(r);
  }
  return out;
}

namespace {

double paired_rank_correlation(const SoundScores& a, const SoundScores& b, double SoundScore::*field) {
  std::vector<double> xa, xb;
  for (const auto& [id, sa] : a) {
    const auto it = b.find(id);
    if (it == b.end()) continue;
    const double va = sa.*field, vb = it->second.*field;
    if (std::isnan(va) || std::isnan(vb)) continue;
    xa.push_back(va);
    xb.push_back(vb);
  }
  if (xa.size() < 3) return kNaN;
  const auto res = spearman(Eigen::Map<const Eigen::VectorXd>(xa.data(), static_cast<Eigen::Index>(xa.size())),
                            Eigen::Map<const Eigen::VectorXd>(xb.data(), static_cast<Eigen::Index>(xb.size())));
  return res.rho;
}

double nan_mean(const std::vector<double>& v) {
  double acc = 0.0;
  int n = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      acc += x;
      ++n;
    }
  }
  return n ? acc / n : kNaN;
}

}  // namespace

ReliabilityResult split_rank_reliability(std::span<const SessionRecord> records, const ReliabilityOptions& opt) {
  std::vector<std::string> workers;
  for (const auto& r : records) workers.push_back(r.log.worker_id);
  std::sort(workers.begin(), workers.end());
  workers.erase(std::unique(workers.begin(), workers.end()), workers.end());
  if (workers.size() < 2) throw NotSplittable("need at least 2 workers, have " + std::to_string(workers.size()));

  ReliabilityResult out;
  for (int split = 0; split < opt.n_splits; ++split) {
    std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(split));
    std::vector<std::string> order = workers;
    std::shuffle(order.begin(), order.end(), rng);
    const std::set<std::string> half_a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(order.size() / 2));

    std::vector<SessionRecord> a, b;
    for (const auto& r : records) {
      if (opt.duplicate_into_both) {
        a.push_back(r);
        b.push_back(r);
      } else if (half_a.count(r.log.worker_id)) {
        a.push_back(r);
      } else {
        b.push_back(r);
      }
    }
    const SoundScores sa = score_sounds(a);
    const SoundScores sb = score_sounds(b);
    out.memorability_rho.push_back(paired_rank_correlation(sa, sb, &SoundScore::normalized));
    out.confusability_rho.push_back(paired_rank_correlation(sa, sb, &SoundScore::c10));
  }
  out.mean_memorability = nan_mean(out.memorability_rho);
  out.mean_confusability = nan_mean(out.confusability_rho);
  return out;
}

std::string scores_to_csv(const SoundScores& scores) {
  std::string out = "sound_id,M,C10,normalized,n_target_appearances,n_last10_appearances\n";
  for (const auto& [id, s] : scores) {
    out += csv::join({id, csv::format_number(s.m), csv::format_number(s.c10), csv::format_number(s.normalized),
                      std::to_string(s.n_target_appearances), std::to_string(s.n_last10_appearances)});
    out += "\n";
  }
  return out;
}

SoundScores scores_from_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw SchemaError("scores file is empty");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const char* name : {"sound_id", "M", "C10", "normalized"}) {
    if (!col.count(name)) throw SchemaError(std::string("missing required column: ") + name);
  }
  SoundScores out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto num = [&](const char* name) {
      const auto v = csv::parse_number(row.at(col.at(name)));
      if (!v) throw SchemaError("line " + std::to_string(r + 1) + ": bad " + name);
      return *v;
    };
    SoundScore s;
    s.m = num("M");
    s.c10 = num("C10");
    s.normalized = num("normalized");
    if (col.count("n_target_appearances")) s.n_target_appearances = static_cast<int>(num("n_target_appearances"));
    if (col.count("n_last10_appearances")) s.n_last10_appearances = static_cast<int>(num("n_last10_appearances"));
    if (!out.emplace(row.at(col.at("sound_id")), s).second) {
      throw DuplicateKey("duplicate sound_id " + row.at(col.at("sound_id")));
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const Slot& s) {
  j = {{"position", s.position}, {"sound_id", s.sound_id}, {"role", to_string(s.role)}};
}

void from_json(const nlohmann::json& j, Slot& s) {
  s.position = j.at("position").get<int>();
  s.sound_id = j.at("sound_id").get<std::string>();
  s.role = parse_role(j.at("role").get<std::string>());
}

void to_json(nlohmann::json& j, const SessionPlan& p) {
  j = {{"session_id", p.session_id}, {"seed", p.seed}, {"slots", p.slots}};
}

void from_json(const nlohmann::json& j, SessionPlan& p) {
  p.session_id = j.at("session_id").get<std::string>();
  p.seed = j.value("seed", std::uint64_t{0});
  p.slots = j.at("slots").get<std::vector<Slot>>();
  for (std::size_t i = 0; i < p.slots.size(); ++i) {
    if (p.slots[i].position != static_cast<int>(i)) throw LogMismatch("plan slots out of order");
  }
}

void to_json(nlohmann::json& j, const SessionLog& l) {
  nlohmann::json latency = nlohmann::json::object();
  for (const auto& [pos, ms] : l.latency_ms) latency[std::to_string(pos)] = ms;
  j = {{"session_id", l.session_id},
       {"worker_id", l.worker_id},
       {"clicks", l.clicks},
       {"latency_ms", latency},
       {"completed", l.completed}};
}

void from_json(const nlohmann::json& j, SessionLog& l) {
  l.session_id = j.at("session_id").get<std::string>();
  l.worker_id = j.at("worker_id").get<std::string>();
  l.clicks = j.at("clicks").get<std::set<int>>();
  l.latency_ms.clear();
  if (j.contains("latency_ms")) {
    for (const auto& [k, v] : j.at("latency_ms").items()) l.latency_ms[std::stoi(k)] = v.get<double>();
  }
  l.completed = j.value("completed", false);
}

void to_json(nlohmann::json& j, const ValidationResult& v) {
  j = {{"vigilance_score", v.vigilance_score},
       {"false_positive_rate", v.false_positive_rate},
       {"accepted", v.accepted}};
}

}  // namespace audmem
