#pragma once

#include "audmem/experiment.hpp"
#include "audmem/features.hpp"
#include "audmem/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace audmem {

/// Context comparison of one target against the K sounds before it.
struct ContextZ {
  Eigen::VectorXd z;
  Eigen::VectorXd difference;  ///< target - context mean
  bool zero_std = false;       ///< some column had zero context spread (z set to 0 there)
};

/// K = 1 gives the signed difference; otherwise (target - mean) / sample std.
/// `context` holds one sound per row.
ContextZ context_z(const Eigen::Ref<const Eigen::VectorXd>& target, const Eigen::Ref<const Eigen::MatrixXd>& context);

struct GameExample {
  std::string game_id;
  std::string target_id;
  int target_first = 0;
  int label = 0;  ///< 1 iff the second presentation was clicked
  Eigen::VectorXd absolute;
  Eigen::VectorXd context;
  bool zero_std = false;
  std::vector<std::string> context_ids;
  std::vector<int> context_positions;  ///< empty for random contexts
};

struct ExampleSet {
  int k = 5;
  std::vector<std::string> columns;
  std::vector<GameExample> examples;  ///< sorted by (game_id, target_first)
  int skipped_too_early = 0;
  int skipped_missing_features = 0;
  int skipped_middle_band = 0;
  double lower_cutoff = 0.0;
  double upper_cutoff = 0.0;
};

struct ExampleConfig {
  int k = 5;
  double lower_percentile = 15.0;
  double upper_percentile = 85.0;
  PlanConfig plan;  ///< acceptance thresholds
};

/// Percentile with linear interpolation between order statistics.
double percentile(std::vector<double> values, double pct);

/// One example per accepted game per target whose normalized score lies in
/// the lower or upper band.
ExampleSet build_game_examples(std::span<const SessionRecord> records, const FeatureTable& table,
                               const SoundScores& scores, const ExampleConfig& cfg = {});

/// Same examples with the context redrawn uniformly from `pool` minus the target.
ExampleSet noise_baseline_examples(const ExampleSet& examples, const FeatureTable& table,
                                   std::span<const std::string> pool, std::uint64_t seed);

enum class TopFeatureRanking { individual_r2, shapley_delta_r2 };

/// Best `n_high` high-level and `n_low` other columns for predicting the
/// normalized score.
std::vector<std::string> top_context_features(const FeatureTable& table, const SoundScores& scores, int n_high = 25,
                                              int n_low = 25,
                                              TopFeatureRanking ranking = TopFeatureRanking::individual_r2,
                                              const ShapleyConfig& shapley = {});

struct GridRow {
  std::string feature_set;
  int context_length = 0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();  ///< holdout
  double mean_fold_accuracy = std::numeric_limits<double>::quiet_NaN();
  int n_examples = 0;
  int n_features = 0;
  std::optional<std::string> error;
};

struct ExperimentGrid {
  std::vector<GridRow> rows;
  std::vector<std::string> top_features;

  const GridRow* find(const std::string& feature_set, int k) const;
  std::string to_csv() const;
};

const std::vector<std::string>& grid_feature_sets();

/// Evaluates every feature set on the true-context and noise-context examples
/// of each context length. Rows run in parallel.
ExperimentGrid run_experiment_grid(std::span<const ExampleSet> true_context, std::span<const ExampleSet> noise_context,
                                   const std::vector<std::string>& top_features,
                                   const CrossValidationConfig& cv = {});

struct ContextEvalConfig {
  std::vector<int> context_lengths{1, 5};
  double lower_percentile = 15.0;
  double upper_percentile = 85.0;
  PlanConfig plan;
  CrossValidationConfig cv;
  int n_top_high = 25;
  int n_top_low = 25;
  TopFeatureRanking ranking = TopFeatureRanking::individual_r2;
  std::uint64_t seed = 0;  ///< noise-baseline draws
};

/// Examples, noise baseline, top-feature selection and grid in one call.
ExperimentGrid context_evaluation(std::span<const SessionRecord> records, const FeatureTable& table,
                                  const ContextEvalConfig& cfg = {});

}  // namespace audmem
