#include "audmem/simulant.hpp"

#include "audmem/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <thread>

namespace audmem {

void SimulantProfile::validate() const {
  auto check = [](double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(what + " must lie in [0, 1]");
  };
  check(p_vigilance, "p_vigilance");
  for (const auto& [id, p] : p_recall) {
    check(p, "p_recall of '" + id + "'");
    if (!p_confuse.count(id)) throw ConfigError("sound '" + id + "' has no p_confuse");
  }
  for (const auto& [id, p] : p_confuse) {
    check(p, "p_confuse of '" + id + "'");
    if (!p_recall.count(id)) throw ConfigError("sound '" + id + "' has no p_recall");
  }
  if (context && context->k < 1) throw ConfigError("context length must be at least 1");
}

SimulantProfile uniform_profile(std::span<const std::string> pool, double recall_lo, double recall_hi,
                                double confuse_lo, double confuse_hi, double p_vigilance, std::uint64_t seed) {
  SimulantProfile p;
  p.p_vigilance = p_vigilance;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> recall(recall_lo, recall_hi), confuse(confuse_lo, confuse_hi);
  for (const auto& id : pool) {
    p.p_recall[id] = recall(rng);
    p.p_confuse[id] = confuse(rng);
  }
  p.validate();
  return p;
}

SimulantProfile constant_profile(std::span<const std::string> pool, double p_recall, double p_confuse,
                                 double p_vigilance) {
  SimulantProfile p;
  p.p_vigilance = p_vigilance;
  for (const auto& id : pool) {
    p.p_recall[id] = p_recall;
    p.p_confuse[id] = p_confuse;
  }
  p.validate();
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double simulant_recall_probability(const SimulantProfile& profile, const SessionPlan& plan, int first) {
  const std::string& id = plan.slots.at(static_cast<std::size_t>(first)).sound_id;
  const double p = profile.p_recall.at(id);
  if (!profile.context || profile.context->beta == 0.0) return p;

  const auto& values = profile.context->feature;
  const int start = std::max(0, first - profile.context->k);
  const int k = first - start;
  double z = 0.0;
  if (k > 0) {
    double sum = 0.0;
    for (int i = start; i < first; ++i) sum += values.at(plan.slots[static_cast<std::size_t>(i)].sound_id);
    const double mean = sum / k;
    const double diff = values.at(id) - mean;
    if (k == 1) {
      z = diff;
    } else {
      double ss = 0.0;
      for (int i = start; i < first; ++i) {
        const double d = values.at(plan.slots[static_cast<std::size_t>(i)].sound_id) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / (k - 1));
      z = sd > 0.0 ? diff / sd : 0.0;
    }
  }
  const double pc = std::clamp(p, 1e-9, 1.0 - 1e-9);
  const double logit = std::log(pc / (1.0 - pc)) + profile.context->beta * z;
  return 1.0 / (1.0 + std::exp(-logit));
}

namespace {

std::string padded(const char* prefix, long value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06ld", prefix, value);
  return buf;
}

SessionLog respond(const SimulantProfile& profile, const SessionPlan& plan, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> latency(250, 2500);
  SessionLog log;
  log.session_id = plan.session_id;
  log.completed = true;
  for (const auto& slot : plan.slots) {
    double p = 0.0;
    switch (slot.role) {
      case SlotRole::target_second: {
        const auto first = std::find_if(plan.slots.begin(), plan.slots.end(), [&](const Slot& s) {
          return s.role == SlotRole::target_first && s.sound_id == slot.sound_id;
        });
        p = simulant_recall_probability(profile, plan, first->position);
        break;
      }
      case SlotRole::vigilance_second:
        p = profile.p_vigilance;
        break;
      default:
        p = profile.p_confuse.at(slot.sound_id);
        break;
    }
    const double draw = u(rng);
    const int ms = latency(rng);
    if (draw < p) {
      log.clicks.insert(slot.position);
      log.latency_ms[slot.position] = ms;
    }
  }
  return log;
}

}  // namespace

std::vector<SessionRecord> simulate_games(std::span<const std::string> pool, const SimulantProfile& profile,
                                          int n_games, std::uint64_t seed, const SimulationConfig& cfg) {
  profile.validate();
  for (const auto& id : pool) {
    if (!profile.p_recall.count(id)) throw ConfigError("profile does not cover sound '" + id + "'");
  }
  if (cfg.rounds_per_worker < 1 || cfg.rounds_per_worker > cfg.plan.max_rounds) {
    throw ConfigError("rounds per worker must lie in [1, " + std::to_string(cfg.plan.max_rounds) + "]");
  }
  const int per_worker = cfg.rounds_per_worker;
  const int n_workers = (std::max(n_games, 0) + per_worker - 1) / per_worker;
  std::vector<SessionRecord> out(static_cast<std::size_t>(std::max(n_games, 0)));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int w = next++; w < n_workers; w = next++) {
      try {
        WorkerHistory history;
        const std::string worker_id = padded("sim-w", w);
        for (int g = w * per_worker; g < std::min(n_games, (w + 1) * per_worker); ++g) {
          const auto gi = static_cast<std::uint64_t>(g);
          SessionRecord rec;
          rec.plan = plan_session(pool, history, derive_seed(seed, 2 * gi), cfg.plan, padded("sim-g", g));
          std::mt19937_64 rng(derive_seed(seed, 2 * gi + 1));
          rec.log = respond(profile, rec.plan, rng);
          rec.log.worker_id = worker_id;
          ++history.sessions;
          for (const auto& t : rec.plan.target_ids()) history.targets.insert(t);
          out[static_cast<std::size_t>(g)] = std::move(rec);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, cfg.threads ? cfg.threads : std::thread::hardware_concurrency());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<std::string> planted_truth(const SimulantProfile& profile) {
  profile.validate();
  std::vector<std::pair<double, std::string>> v;
  for (const auto& [id, r] : profile.p_recall) v.emplace_back(r - profile.p_confuse.at(id), id);
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [_, id] : v) out.push_back(std::move(id));
  return out;
}

}  // namespace audmem
