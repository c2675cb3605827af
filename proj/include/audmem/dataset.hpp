#pragma once

#include "audmem/experiment.hpp"
#include "audmem/features.hpp"
#include "audmem/stats.hpp"

#include <string>

namespace audmem {

enum class ScoreTarget { normalized, memorability, confusability };

ScoreTarget parse_score_target(const std::string& s);
std::string to_string(ScoreTarget t);

/// Joins feature rows with per-sound scores. Sounds missing from either side
/// or with an undefined score are left out; feature cells may still be NaN.
Dataset join_scores(const FeatureTable& table, const SoundScores& scores, ScoreTarget target);

}  // namespace audmem
