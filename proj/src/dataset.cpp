#include "audmem/dataset.hpp"

#include "audmem/error.hpp"

namespace audmem {

ScoreTarget parse_score_target(const std::string& s) {
  if (s == "normalized") return ScoreTarget::normalized;
  if (s == "memorability") return ScoreTarget::memorability;
  if (s == "confusability") return ScoreTarget::confusability;
  throw ConfigError("unknown score target '" + s + "'");
}

std::string to_string(ScoreTarget t) {
  switch (t) {
    case ScoreTarget::normalized: return "normalized";
    case ScoreTarget::memorability: return "memorability";
    case ScoreTarget::confusability: return "confusability";
  }
  return "normalized";
}

Dataset join_scores(const FeatureTable& table, const SoundScores& scores, ScoreTarget target) {
  std::vector<Eigen::Index> rows;
  std::vector<double> ys;
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    const auto it = scores.find(table.ids()[static_cast<std::size_t>(r)]);
    if (it == scores.end()) continue;
    const SoundScore& s = it->second;
    const double y = target == ScoreTarget::normalized ? s.normalized
                     : target == ScoreTarget::memorability ? s.m
                                                           : s.c10;
    if (std::isnan(y)) continue;
    rows.push_back(r);
    ys.push_back(y);
  }
  Dataset ds;
  ds.x.resize(static_cast<Eigen::Index>(rows.size()), table.values().cols());
  ds.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.x.row(static_cast<Eigen::Index>(i)) = table.values().row(rows[i]);
    ds.row_ids.push_back(table.ids()[static_cast<std::size_t>(rows[i])]);
  }
  for (const auto& c : table.columns()) ds.names.push_back(c.name);
  return ds;
}

}  // namespace audmem
