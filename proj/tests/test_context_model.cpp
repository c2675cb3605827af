#include "audmem/context_model.hpp"
#include "audmem/error.hpp"
#include "audmem/simulant.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace audmem;

namespace {

std::vector<std::string> make_pool(int n) {
  std::vector<std::string> pool;
  for (int i = 0; i < n; ++i) pool.push_back("snd" + std::to_string(100 + i));
  return pool;
}

FeatureTable random_table(const std::vector<std::string>& pool, int n_high, int n_low, std::uint64_t seed) {
  std::vector<FeatureColumn> cols;
  for (int i = 0; i < n_high; ++i) cols.push_back({"hl_f" + std::to_string(i), FeatureTag::high_level});
  for (int i = 0; i < n_low; ++i) cols.push_back({"low_f" + std::to_string(i), FeatureTag::low_level});
  FeatureTable t(cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (const auto& id : pool) {
    Eigen::VectorXd v(n_high + n_low);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
    t.add_row(id, v);
  }
  return t;
}

struct Fixture {
  std::vector<std::string> pool = make_pool(150);
  FeatureTable table = random_table(pool, 4, 4, 1);
  std::vector<SessionRecord> records;
  SoundScores scores;

  Fixture() {
    const SimulantProfile profile = uniform_profile(pool, 0.1, 0.9, 0.0, 0.2, 1.0, 2);
    records = simulate_games(pool, profile, 400, 3);
    scores = score_sounds(accepted_sessions(records));
  }
};

}  // namespace

TEST_CASE("K=1 context is a signed difference, zero against itself") {
  const Eigen::Vector3d target(1.5, -2.0, 0.25);
  Eigen::MatrixXd ctx(1, 3);
  ctx.row(0) = target.transpose();
  const ContextZ same = context_z(target, ctx);
  CHECK(same.z.cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(same.zero_std);

  ctx.row(0) << 1.0, 1.0, 1.0;
  const ContextZ diff = context_z(target, ctx);
  CHECK(diff.z[0] == 0.5);
  CHECK(diff.z[1] == -3.0);
  CHECK(diff.z[2] == -0.75);
}

TEST_CASE("K=5 identical context sets the zero-std flag and z = 0") {
  const Eigen::Vector2d target(3.0, 1.0);
  Eigen::MatrixXd ctx(5, 2);
  for (int i = 0; i < 5; ++i) ctx.row(i) << 1.0, static_cast<double>(i);
  const ContextZ z = context_z(target, ctx);
  CHECK(z.zero_std);
  CHECK(z.z[0] == 0.0);
  CHECK(z.difference[0] == 2.0);
  // Second column: mean 2, sample std sqrt(2.5).
  CHECK(z.z[1] == doctest::Approx(-1.0 / std::sqrt(2.5)));
  CHECK(z.z.allFinite());
}

TEST_CASE("K=1 equals the K=5 computation on a duplicated context, by difference") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd target(6), one(6);
    for (int i = 0; i < 6; ++i) {
      target[i] = g(rng);
      one[i] = g(rng);
    }
    Eigen::MatrixXd ctx1(1, 6), ctx5(5, 6);
    ctx1.row(0) = one.transpose();
    for (int r = 0; r < 5; ++r) ctx5.row(r) = one.transpose();
    const ContextZ a = context_z(target, ctx1), b = context_z(target, ctx5);
    CHECK((a.z - b.difference).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(b.zero_std);
  }
}

TEST_CASE("context_z shape errors") {
  CHECK_THROWS_AS(context_z(Eigen::Vector2d(1, 2), Eigen::MatrixXd(0, 2)), ConfigError);
  CHECK_THROWS_AS(context_z(Eigen::Vector2d(1, 2), Eigen::MatrixXd::Ones(3, 3)), ConfigError);
}

TEST_CASE("percentile with linear interpolation") {
  CHECK(percentile({1, 2, 3, 4, 5}, 50) == 3.0);
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({10, 0, 20}, 0) == 0.0);
  CHECK(percentile({10, 0, 20}, 100) == 20.0);
  CHECK(percentile({0, 10}, 15) == doctest::Approx(1.5));
  CHECK(std::isnan(percentile({}, 50)));
}

TEST_CASE("examples come only from the outer score bands and accepted games") {
  Fixture f;
  const ExampleSet set = build_game_examples(f.records, f.table, f.scores);
  REQUIRE(!set.examples.empty());
  CHECK(set.k == 5);
  CHECK(set.lower_cutoff < set.upper_cutoff);
  std::set<std::string> accepted_ids;
  for (const auto& r : accepted_sessions(f.records)) accepted_ids.insert(r.plan.session_id);
  for (const auto& ex : set.examples) {
    const double s = f.scores.at(ex.target_id).normalized;
    CHECK((s <= set.lower_cutoff || s >= set.upper_cutoff));
    CHECK(accepted_ids.count(ex.game_id) == 1);
  }
  CHECK(set.skipped_middle_band > 0);

  // A middle-band sound never becomes an example.
  std::vector<std::pair<double, std::string>> by_score;
  for (const auto& [id, s] : f.scores)
    if (!std::isnan(s.normalized)) by_score.emplace_back(s.normalized, id);
  std::sort(by_score.begin(), by_score.end());
  const std::string median_id = by_score[by_score.size() / 2].second;
  for (const auto& ex : set.examples) CHECK(ex.target_id != median_id);
}

TEST_CASE("context slots lie strictly before the first presentation") {
  Fixture f;
  for (int k : {1, 5}) {
    ExampleConfig cfg;
    cfg.k = k;
    const ExampleSet set = build_game_examples(f.records, f.table, f.scores, cfg);
    std::map<std::string, const SessionRecord*> by_id;
    for (const auto& r : f.records) by_id[r.plan.session_id] = &r;
    for (const auto& ex : set.examples) {
      REQUIRE(ex.context_positions.size() == static_cast<std::size_t>(k));
      const SessionPlan& plan = by_id.at(ex.game_id)->plan;
      for (std::size_t i = 0; i < ex.context_positions.size(); ++i) {
        const int p = ex.context_positions[i];
        CHECK(p < ex.target_first);
        CHECK(p >= ex.target_first - k);
        CHECK(plan.slots[static_cast<std::size_t>(p)].sound_id == ex.context_ids[i]);
      }
      CHECK(plan.slots[static_cast<std::size_t>(ex.target_first)].role == SlotRole::target_first);
      // Recompute the context from the table and compare.
      Eigen::MatrixXd ctx(k, f.table.values().cols());
      for (int i = 0; i < k; ++i) ctx.row(i) = f.table.row(ex.context_ids[static_cast<std::size_t>(i)]).transpose();
      CHECK((context_z(f.table.row(ex.target_id), ctx).z - ex.context).cwiseAbs().maxCoeff() == 0.0);
      CHECK(ex.label == static_cast<int>(by_id.at(ex.game_id)->log.clicks.count(ex.target_first + 61)));
    }
  }
}

TEST_CASE("targets earlier than K are skipped and counted") {
  Fixture f;
  ExampleConfig cfg;
  cfg.k = 40;
  const ExampleSet set = build_game_examples(f.records, f.table, f.scores, cfg);
  CHECK(set.skipped_too_early > 0);
  for (const auto& ex : set.examples) CHECK(ex.target_first >= 40);
}

TEST_CASE("example building ignores game order") {
  Fixture f;
  const ExampleSet a = build_game_examples(f.records, f.table, f.scores);
  auto shuffled = f.records;
  std::mt19937_64 rng(9);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const ExampleSet b = build_game_examples(shuffled, f.table, f.scores);
  REQUIRE(a.examples.size() == b.examples.size());
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].game_id == b.examples[i].game_id);
    CHECK(a.examples[i].target_first == b.examples[i].target_first);
    CHECK(a.examples[i].context == b.examples[i].context);
  }
}

TEST_CASE("noise baseline: reproducible, never contains the target, same examples") {
  Fixture f;
  const ExampleSet truth = build_game_examples(f.records, f.table, f.scores);
  const ExampleSet n1 = noise_baseline_examples(truth, f.table, f.pool, 11);
  const ExampleSet n2 = noise_baseline_examples(truth, f.table, f.pool, 11);
  const ExampleSet n3 = noise_baseline_examples(truth, f.table, f.pool, 12);
  REQUIRE(n1.examples.size() == truth.examples.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < n1.examples.size(); ++i) {
    const auto& e = n1.examples[i];
    CHECK(e.context_ids == n2.examples[i].context_ids);
    any_diff |= e.context_ids != n3.examples[i].context_ids;
    CHECK(e.context_ids.size() == 5);
    CHECK(std::find(e.context_ids.begin(), e.context_ids.end(), e.target_id) == e.context_ids.end());
    CHECK(std::set<std::string>(e.context_ids.begin(), e.context_ids.end()).size() == 5);
    CHECK(e.label == truth.examples[i].label);
    CHECK(e.absolute == truth.examples[i].absolute);
    CHECK(e.context_positions.empty());
  }
  CHECK(any_diff);

  // A pool of exactly K + 1 sounds that includes the target leaves the other K.
  ExampleSet one = truth;
  one.examples.resize(1);
  std::vector<std::string> tiny{one.examples[0].target_id};
  for (const auto& id : f.pool) {
    if (tiny.size() == 6) break;
    if (id != tiny[0]) tiny.push_back(id);
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto& ids = noise_baseline_examples(one, f.table, tiny, seed).examples[0].context_ids;
    CHECK(std::find(ids.begin(), ids.end(), tiny[0]) == ids.end());
  }
  CHECK_THROWS_AS(noise_baseline_examples(one, f.table, std::vector<std::string>(tiny.begin(), tiny.begin() + 5), 0),
                  ConfigError);
}

TEST_CASE("random and true contexts give comparable |z| when plans draw context uniformly") {
  Fixture f;
  const ExampleSet truth = build_game_examples(f.records, f.table, f.scores);
  double true_sum = 0, noise_sum = 0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ExampleSet noise = noise_baseline_examples(truth, f.table, f.pool, seed);
    for (std::size_t i = 0; i < truth.examples.size(); ++i) {
      true_sum += truth.examples[i].context.cwiseAbs().sum();
      noise_sum += noise.examples[i].context.cwiseAbs().sum();
      ++n;
    }
  }
  CHECK(n > 0);
  const double ratio = noise_sum / true_sum;
  CHECK(ratio > 0.85);
  CHECK(ratio < 1.15);
}

TEST_CASE("top features split by tag") {
  Fixture f;
  const auto top = top_context_features(f.table, f.scores, 2, 3);
  REQUIRE(top.size() == 5);
  for (int i = 0; i < 2; ++i) CHECK(top[static_cast<std::size_t>(i)].rfind("hl_", 0) == 0);
  for (int i = 2; i < 5; ++i) CHECK(top[static_cast<std::size_t>(i)].rfind("low_", 0) == 0);
}

TEST_CASE("grid has every feature set for every context length") {
  Fixture f;
  std::vector<ExampleSet> truth, noise;
  for (int k : {1, 5}) {
    ExampleConfig cfg;
    cfg.k = k;
    truth.push_back(build_game_examples(f.records, f.table, f.scores, cfg));
    noise.push_back(noise_baseline_examples(truth.back(), f.table, f.pool, static_cast<std::uint64_t>(k)));
  }
  const auto top = top_context_features(f.table, f.scores, 2, 2);
  const ExperimentGrid grid = run_experiment_grid(truth, noise, top);
  REQUIRE(grid.rows.size() == 10);
  for (int k : {1, 5}) {
    for (const auto& name : grid_feature_sets()) {
      const GridRow* row = grid.find(name, k);
      REQUIRE(row != nullptr);
      CHECK_FALSE(row->error.has_value());
      CHECK((row->accuracy >= 0.0 && row->accuracy <= 1.0));
    }
    CHECK(grid.find("absolute_only", k)->n_features == 8);
    CHECK(grid.find("absolute_plus_all_context", k)->n_features == 16);
    CHECK(grid.find("absolute_plus_top50_context", k)->n_features == 12);
    CHECK(grid.find("context_only", k)->n_features == 8);
  }
  const std::string csv = grid.to_csv();
  CHECK(csv.rfind("feature_set,context_length,accuracy,mean_fold_accuracy,n_examples,n_features,error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);

  const ExperimentGrid again = run_experiment_grid(truth, noise, top);
  CHECK(again.to_csv() == csv);
}

TEST_CASE("grid rows report errors instead of aborting") {
  Fixture f;
  ExampleSet tiny = build_game_examples(f.records, f.table, f.scores);
  tiny.examples.resize(10);
  const ExampleSet noise = noise_baseline_examples(tiny, f.table, f.pool, 1);
  const ExperimentGrid grid = run_experiment_grid(std::vector{tiny}, std::vector{noise}, {});
  REQUIRE(grid.rows.size() == 5);
  for (const auto& row : grid.rows) {
    if (row.feature_set == "absolute_plus_top50_context") continue;
    REQUIRE(row.error.has_value());
    CHECK(row.error->find("StratifyError") != std::string::npos);
  }
}
