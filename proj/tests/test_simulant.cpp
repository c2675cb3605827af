#include "audmem/error.hpp"
#include "audmem/simulant.hpp"
#include "audmem/stats.hpp"

#include "plan_checker.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace audmem;

namespace {

std::vector<std::string> make_pool(int n) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) pool.push_back("snd" + std::to_string(1000 + i));
  return pool;
}

// P(X >= k) for X ~ Binomial(n, p), summed term by term.
double binomial_upper_tail(int n, double p, int k) {
  double total = 0.0;
  for (int i = k; i <= n; ++i) {
    double c = 1.0;
    for (int j = 0; j < i; ++j) c = c * (n - j) / (j + 1);
    total += c * std::pow(p, i) * std::pow(1.0 - p, n - i);
  }
  return total;
}

}  // namespace

TEST_CASE("derive_seed is splitmix64 of seed plus golden-ratio steps") {
  // Reference splitmix64 stream from state 0: first output.
  CHECK(derive_seed(0, 0) == 0xE220A8397B1DCDAFULL);
  CHECK(derive_seed(0, 1) == 0x6E789E6AA1B965F4ULL);
  CHECK(derive_seed(5, 3) != derive_seed(5, 4));
  CHECK(derive_seed(5, 3) != derive_seed(6, 3));
}

TEST_CASE("profile validation") {
  const auto pool = make_pool(3);
  SimulantProfile p = constant_profile(pool, 0.5, 0.2, 1.0);
  CHECK_NOTHROW(p.validate());
  p.p_recall["snd1000"] = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = constant_profile(pool, 0.5, 0.2, 1.0);
  p.p_vigilance = -0.1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = constant_profile(pool, 0.5, 0.2, 1.0);
  p.p_confuse.erase("snd1001");
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = constant_profile(pool, 0.5, 0.2, 1.0);
  p.p_recall["extra"] = 0.1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = constant_profile(pool, 0.5, 0.2, 1.0);
  p.p_confuse["snd1000"] = std::nan("");
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(constant_profile(pool, 0.5, 0.2, 2.0), ConfigError);
}

TEST_CASE("simulation requires the profile to cover the pool and propagates infeasibility") {
  const auto pool = make_pool(100);
  const auto partial = constant_profile(std::span(pool).first(50), 0.5, 0.1, 1.0);
  CHECK_THROWS_AS(simulate_games(pool, partial, 4, 1), ConfigError);

  const auto small = make_pool(60);
  CHECK_THROWS_AS(simulate_games(small, constant_profile(small, 0.5, 0.1, 1.0), 4, 1), PlanInfeasible);

  SimulationConfig cfg;
  cfg.rounds_per_worker = 9;
  CHECK_THROWS_AS(simulate_games(pool, constant_profile(pool, 0.5, 0.1, 1.0), 4, 1, cfg), ConfigError);
}

TEST_CASE("p_recall = 1 gives M = 1 for every target sound") {
  const auto pool = make_pool(150);
  const auto records = simulate_games(pool, constant_profile(pool, 1.0, 0.1, 1.0), 200, 2);
  const SoundScores s = score_sounds(records);
  int targets = 0;
  for (const auto& [id, sc] : s) {
    if (sc.n_target_appearances == 0) continue;
    ++targets;
    CHECK(sc.m == 1.0);
  }
  CHECK(targets > 100);
}

TEST_CASE("silent simulant with perfect vigilance: M = 0, C10 = 0, all accepted") {
  const auto pool = make_pool(150);
  const auto records = simulate_games(pool, constant_profile(pool, 0.0, 0.0, 1.0), 200, 3);
  CHECK(accepted_sessions(records).size() == records.size());
  for (const auto& r : records) {
    const ValidationResult v = validate_session(r.plan, r.log);
    CHECK(v.vigilance_score == 1.0);
    CHECK(v.false_positive_rate == 0.0);
  }
  for (const auto& [id, sc] : score_sounds(records)) {
    if (sc.n_target_appearances > 0) CHECK(sc.m == 0.0);
    if (sc.n_last10_appearances > 0) CHECK(sc.c10 == 0.0);
  }
}

TEST_CASE("coin-flip vigilance is rejected at the binomial tail rate") {
  const auto pool = make_pool(402);
  const auto records = simulate_games(pool, constant_profile(pool, 0.5, 0.1, 0.5), 2000, 4);
  std::size_t accepted = 0;
  for (const auto& r : records) accepted += validate_session(r.plan, r.log).accepted;
  const double rate = static_cast<double>(accepted) / static_cast<double>(records.size());
  // Acceptance needs at least 13 of 20 repeats clicked.
  const double tail = binomial_upper_tail(20, 0.5, 13);
  CHECK(tail == doctest::Approx(137980.0 / 1048576.0));
  const double se = std::sqrt(tail * (1.0 - tail) / static_cast<double>(records.size()));
  CHECK(std::abs(rate - tail) < 4.0 * se);
}

TEST_CASE("coin-flip vigilance: acceptance below 10% over 200 games") {
  const auto pool = make_pool(402);
  const auto records = simulate_games(pool, constant_profile(pool, 0.5, 0.1, 0.5), 200, 5);
  const double rate = static_cast<double>(accepted_sessions(records).size()) / 200.0;
  CHECK(rate < 0.10);
}

TEST_CASE("plans from simulation satisfy the protocol and per-worker target history") {
  const auto pool = make_pool(402);
  const auto records = simulate_games(pool, constant_profile(pool, 0.5, 0.1, 1.0), 120, 6);
  std::map<std::string, std::set<std::string>> worker_targets;
  std::map<std::string, int> worker_games;
  for (const auto& r : records) {
    const auto& prior = worker_targets[r.log.worker_id];
    const auto v = plan_check::violations(r.plan, prior);
    CHECK_MESSAGE(v.empty(), r.plan.session_id << ": " << (v.empty() ? "" : v.front()));
    for (const auto& t : r.plan.target_ids()) worker_targets[r.log.worker_id].insert(t);
    ++worker_games[r.log.worker_id];
    CHECK(r.log.session_id == r.plan.session_id);
    CHECK(r.log.completed);
    for (int c : r.log.clicks) CHECK(r.log.latency_ms.count(c) == 1);
  }
  CHECK(worker_games.size() == 15);
  for (const auto& [w, n] : worker_games) CHECK(n == 8);
}

TEST_CASE("simulation is deterministic per seed and independent of thread count") {
  const auto pool = make_pool(200);
  const auto profile = uniform_profile(pool, 0.1, 0.9, 0.0, 0.4, 1.0, 7);
  SimulationConfig one, three;
  one.threads = 1;
  three.threads = 3;
  const auto a = simulate_games(pool, profile, 50, 8, one);
  const auto b = simulate_games(pool, profile, 50, 8, three);
  const auto c = simulate_games(pool, profile, 50, 9, one);
  REQUIRE(a.size() == 50);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].plan.session_id == b[i].plan.session_id);
    CHECK(a[i].plan.slots.size() == b[i].plan.slots.size());
    CHECK(a[i].log.clicks == b[i].log.clicks);
    CHECK(a[i].log.latency_ms == b[i].log.latency_ms);
    CHECK(a[i].log.worker_id == b[i].log.worker_id);
    differs |= a[i].log.clicks != c[i].log.clicks;
  }
  CHECK(differs);
}

TEST_CASE("planted_truth ordering") {
  SimulantProfile p;
  p.p_recall = {{"b", 0.9}, {"a", 0.1}};
  p.p_confuse = {{"b", 0.0}, {"a", 0.0}};
  CHECK(planted_truth(p) == std::vector<std::string>{"b", "a"});

  p.p_recall = {{"c", 0.5}, {"a", 0.5}, {"b", 0.5}};
  p.p_confuse = {{"c", 0.1}, {"a", 0.1}, {"b", 0.1}};
  CHECK(planted_truth(p) == std::vector<std::string>{"a", "b", "c"});

  const auto pool = make_pool(80);
  const auto base = uniform_profile(pool, 0.1, 0.5, 0.0, 0.4, 1.0, 11);
  auto shifted = base;
  for (auto& [id, v] : shifted.p_recall) v += 0.3;
  for (auto& [id, v] : shifted.p_confuse) v += 0.3;
  CHECK(planted_truth(base) == planted_truth(shifted));
}

TEST_CASE("context-sensitive recall follows the logistic link") {
  SessionPlan plan;
  plan.session_id = "s";
  const std::vector<std::string> ids{"a", "b", "c", "t"};
  for (int i = 0; i < 4; ++i) plan.slots.push_back({i, ids[static_cast<std::size_t>(i)], SlotRole::filler});
  plan.slots[3].role = SlotRole::target_first;

  SimulantProfile p;
  for (const auto& id : ids) {
    p.p_recall[id] = 0.4;
    p.p_confuse[id] = 0.1;
  }
  CHECK(simulant_recall_probability(p, plan, 3) == 0.4);

  ContextSensitivity ctx;
  ctx.feature = {{"a", 1.0}, {"b", 2.0}, {"c", 3.0}, {"t", 4.0}};
  ctx.beta = 0.7;
  ctx.k = 3;
  p.context = ctx;
  // Context mean 2, sample std 1, so z = 2.
  const double logit = std::log(0.4 / 0.6) + 0.7 * 2.0;
  CHECK(simulant_recall_probability(p, plan, 3) == doctest::Approx(1.0 / (1.0 + std::exp(-logit))));

  p.context->k = 1;
  CHECK(simulant_recall_probability(p, plan, 3) == doctest::Approx(1.0 / (1.0 + std::exp(-(std::log(0.4 / 0.6) + 0.7)))));

  p.context->beta = -0.7;
  CHECK(simulant_recall_probability(p, plan, 3) < 0.4);
  CHECK(simulant_recall_probability(p, plan, 0) == doctest::Approx(0.4));
}

TEST_CASE("recovered mean M converges to the planted mean at 100 games per sound") {
  const auto pool = make_pool(402);
  const auto profile = uniform_profile(pool, 0.1, 0.9, 0.0, 0.4, 1.0, 12);
  // About 1.5 targets per game.
  const int n_games = static_cast<int>(std::lround(402.0 * 100.0 / 1.5));
  const auto records = accepted_sessions(simulate_games(pool, profile, n_games, 13));
  const SoundScores s = score_sounds(records);
  double planted = 0.0, recovered = 0.0;
  int n = 0;
  for (const auto& [id, sc] : s) {
    if (sc.n_target_appearances == 0) continue;
    planted += profile.p_recall.at(id);
    recovered += sc.m;
    ++n;
  }
  REQUIRE(n == 402);
  CHECK(std::abs(recovered / n - planted / n) < 0.02);
}
