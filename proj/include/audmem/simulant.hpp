#pragma once

#include "audmem/experiment.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace audmem {

/// Recall of a target shifted by the context z of one feature:
/// p' = sigmoid(logit(p) + beta * z).
struct ContextSensitivity {
  std::map<std::string, double> feature;  ///< per-sound value of the planted feature
  double beta = 0.0;
  int k = 5;  ///< sounds before the first presentation
};

struct SimulantProfile {
  std::map<std::string, double> p_recall;   ///< click probability on a target's second presentation
  std::map<std::string, double> p_confuse;  ///< click probability on any first presentation
  double p_vigilance = 1.0;                 ///< click probability on a vigilance repeat
  std::optional<ContextSensitivity> context;

  /// Throws ConfigError for probabilities outside [0, 1] or mismatched ids.
  void validate() const;
};

/// p_recall ~ U[recall_lo, recall_hi], p_confuse ~ U[confuse_lo, confuse_hi].
SimulantProfile uniform_profile(std::span<const std::string> pool, double recall_lo, double recall_hi,
                                double confuse_lo, double confuse_hi, double p_vigilance, std::uint64_t seed);

/// Same recall and confusion for every sound.
SimulantProfile constant_profile(std::span<const std::string> pool, double p_recall, double p_confuse,
                                 double p_vigilance);

struct SimulationConfig {
  PlanConfig plan;
  int rounds_per_worker = 8;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

/// Splitmix64 of (seed, index); used for every derived stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Recall probability of the target whose first presentation is at `first`.
double simulant_recall_probability(const SimulantProfile& profile, const SessionPlan& plan, int first);

/// Workers rotate every `rounds_per_worker` games; each worker's games run in
/// order so target history applies. Deterministic for a given seed.
std::vector<SessionRecord> simulate_games(std::span<const std::string> pool, const SimulantProfile& profile,
                                          int n_games, std::uint64_t seed, const SimulationConfig& cfg = {});

/// Sound ids ordered by p_recall - p_confuse (descending), ties by id.
std::vector<std::string> planted_truth(const SimulantProfile& profile);

}  // namespace audmem
