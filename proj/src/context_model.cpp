#include "audmem/context_model.hpp"

#include "audmem/csv.hpp"
#include "audmem/dataset.hpp"
#include "audmem/error.hpp"

#include <algorithm>
#include <future>
#include <random>

namespace audmem {

ContextZ context_z(const Eigen::Ref<const Eigen::VectorXd>& target, const Eigen::Ref<const Eigen::MatrixXd>& context) {
  if (context.rows() < 1) throw ConfigError("context needs at least one sound");
  if (context.cols() != target.size()) throw ConfigError("context and target widths differ");
  ContextZ out;
  const Eigen::VectorXd mean = context.colwise().mean().transpose();
  out.difference = target - mean;
  if (context.rows() == 1) {
    out.z = out.difference;
    return out;
  }
  const Eigen::VectorXd sd =
      ((context.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<double>(context.rows() - 1))
          .sqrt()
          .matrix()
          .transpose();
  out.z.resize(target.size());
  for (Eigen::Index c = 0; c < target.size(); ++c) {
    if (sd[c] > 0.0) {
      out.z[c] = out.difference[c] / sd[c];
    } else if (std::isnan(sd[c])) {
      out.z[c] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.z[c] = 0.0;
      out.zero_std = true;
    }
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Eigen::MatrixXd gather_rows(const FeatureTable& table, const std::vector<std::string>& ids, bool* missing) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ids.size()), table.values().cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = table.row_index(ids[i]);
    if (!r) {
      *missing = true;
      return {};
    }
    m.row(static_cast<Eigen::Index>(i)) = table.values().row(*r);
  }
  return m;
}

void sort_examples(std::vector<GameExample>& ex) {
  std::sort(ex.begin(), ex.end(), [](const GameExample& a, const GameExample& b) {
    if (a.game_id != b.game_id) return a.game_id < b.game_id;
    return a.target_first < b.target_first;
  });
}

}  // namespace

ExampleSet build_game_examples(std::span<const SessionRecord> records, const FeatureTable& table,
                               const SoundScores& scores, const ExampleConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("context length must be at least 1");
  ExampleSet out;
  out.k = cfg.k;
  for (const auto& c : table.columns()) out.columns.push_back(c.name);

  std::vector<double> defined;
  for (const auto& [id, s] : scores) {
    if (!std::isnan(s.normalized)) defined.push_back(s.normalized);
  }
  out.lower_cutoff = percentile(defined, cfg.lower_percentile);
  out.upper_cutoff = percentile(defined, cfg.upper_percentile);

  for (const auto& rec : records) {
    if (!validate_session(rec.plan, rec.log, cfg.plan).accepted) continue;
    const auto& slots = rec.plan.slots;
    for (const auto& slot : slots) {
      if (slot.role != SlotRole::target_first) continue;
      const auto sc = scores.find(slot.sound_id);
      if (sc == scores.end() || std::isnan(sc->second.normalized) ||
          (sc->second.normalized > out.lower_cutoff && sc->second.normalized < out.upper_cutoff)) {
        ++out.skipped_middle_band;
        continue;
      }
      if (slot.position < cfg.k) {
        ++out.skipped_too_early;
        continue;
      }
      const auto second = std::find_if(slots.begin(), slots.end(), [&](const Slot& s) {
        return s.role == SlotRole::target_second && s.sound_id == slot.sound_id;
      });
      if (second == slots.end()) throw LogMismatch("target '" + slot.sound_id + "' has no second presentation");

      GameExample ex;
      ex.game_id = rec.plan.session_id;
      ex.target_id = slot.sound_id;
      ex.target_first = slot.position;
      ex.label = rec.log.clicks.count(second->position) ? 1 : 0;
      for (int p = slot.position - cfg.k; p < slot.position; ++p) {
        ex.context_positions.push_back(p);
        ex.context_ids.push_back(slots[static_cast<std::size_t>(p)].sound_id);
      }
      bool missing = false;
      const auto target_row = table.row_index(slot.sound_id);
      const Eigen::MatrixXd ctx = gather_rows(table, ex.context_ids, &missing);
      if (!target_row || missing) {
        ++out.skipped_missing_features;
        continue;
      }
      ex.absolute = table.values().row(*target_row).transpose();
      ContextZ cz = context_z(ex.absolute, ctx);
      ex.context = std::move(cz.z);
      ex.zero_std = cz.zero_std;
      out.examples.push_back(std::move(ex));
    }
  }
  sort_examples(out.examples);
  return out;
}

ExampleSet noise_baseline_examples(const ExampleSet& examples, const FeatureTable& table,
                                   std::span<const std::string> pool, std::uint64_t seed) {
  std::vector<std::string> candidates;
  for (const auto& id : pool) {
    if (table.row_index(id)) candidates.push_back(id);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (static_cast<int>(candidates.size()) < examples.k + 1) {
    throw ConfigError("pool too small for a random context of " + std::to_string(examples.k));
  }

  ExampleSet out = examples;
  std::mt19937_64 rng(seed);
  for (auto& ex : out.examples) {
    std::vector<std::string> drawn;
    std::sample(candidates.begin(), candidates.end(), std::back_inserter(drawn), examples.k + 1, rng);
    std::shuffle(drawn.begin(), drawn.end(), rng);
    const auto self = std::find(drawn.begin(), drawn.end(), ex.target_id);
    drawn.erase(self != drawn.end() ? self : drawn.end() - 1);
    bool missing = false;
    const Eigen::MatrixXd ctx = gather_rows(table, drawn, &missing);
    ContextZ cz = context_z(ex.absolute, ctx);
    ex.context = std::move(cz.z);
    ex.zero_std = cz.zero_std;
    ex.context_ids = std::move(drawn);
    ex.context_positions.clear();
  }
  return out;
}

std::vector<std::string> top_context_features(const FeatureTable& table, const SoundScores& scores, int n_high,
                                              int n_low, TopFeatureRanking ranking, const ShapleyConfig& shapley) {
  const Dataset ds = prepare_dataset(join_scores(table, scores, ScoreTarget::normalized));
  std::vector<std::pair<std::string, double>> ranked;
  if (ranking == TopFeatureRanking::individual_r2) {
    for (const auto& s : single_feature_r2(ds)) ranked.emplace_back(s.name, std::isnan(s.r2) ? -1e300 : s.r2);
  } else {
    ShapleyConfig sc = shapley;
    sc.with_individual_r2 = false;
    for (const auto& e : shapley_importance(ds, sc).entries) ranked.emplace_back(e.name, e.shapley_delta_r2);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> high, low;
  for (const auto& [name, score] : ranked) {
    const auto c = table.column_index(name);
    const bool is_high = c && table.columns()[static_cast<std::size_t>(*c)].tag == FeatureTag::high_level;
    auto& bucket = is_high ? high : low;
    if (static_cast<int>(bucket.size()) < (is_high ? n_high : n_low)) bucket.push_back(name);
  }
  high.insert(high.end(), low.begin(), low.end());
  return high;
}

const std::vector<std::string>& grid_feature_sets() {
  static const std::vector<std::string> sets{"absolute_only", "absolute_plus_all_context",
                                             "absolute_plus_top50_context", "context_only",
                                             "context_only_noise_baseline"};
  return sets;
}

const GridRow* ExperimentGrid::find(const std::string& feature_set, int k) const {
  for (const auto& r : rows) {
    if (r.feature_set == feature_set && r.context_length == k) return &r;
  }
  return nullptr;
}

std::string ExperimentGrid::to_csv() const {
  std::string out = "feature_set,context_length,accuracy,mean_fold_accuracy,n_examples,n_features,error\n";
  for (const auto& r : rows) {
    out += csv::join({r.feature_set, std::to_string(r.context_length), csv::format_number(r.accuracy),
                      csv::format_number(r.mean_fold_accuracy), std::to_string(r.n_examples),
                      std::to_string(r.n_features), r.error.value_or("")});
    out += "\n";
  }
  return out;
}

namespace {

// Builds the design matrix of one feature set; columns with any NaN are left out.
Eigen::MatrixXd design(const ExampleSet& set, bool absolute, bool context, const std::vector<bool>& context_mask) {
  const auto n = static_cast<Eigen::Index>(set.examples.size());
  const auto p = static_cast<Eigen::Index>(set.columns.size());
  std::vector<std::pair<bool, Eigen::Index>> cols;  // (is_context, column)
  auto usable = [&](bool ctx, Eigen::Index c) {
    for (const auto& ex : set.examples) {
      if (std::isnan(ctx ? ex.context[c] : ex.absolute[c])) return false;
    }
    return true;
  };
  for (Eigen::Index c = 0; c < p && absolute; ++c) {
    if (usable(false, c)) cols.emplace_back(false, c);
  }
  for (Eigen::Index c = 0; c < p && context; ++c) {
    if (context_mask[static_cast<std::size_t>(c)] && usable(true, c)) cols.emplace_back(true, c);
  }
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ex = set.examples[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < cols.size(); ++j) {
      x(i, static_cast<Eigen::Index>(j)) = cols[j].first ? ex.context[cols[j].second] : ex.absolute[cols[j].second];
    }
  }
  return x;
}

GridRow evaluate_row(const std::string& name, const ExampleSet& set, bool absolute, bool context,
                     const std::vector<bool>& mask, const CrossValidationConfig& cv) {
  GridRow row;
  row.feature_set = name;
  row.context_length = set.k;
  row.n_examples = static_cast<int>(set.examples.size());
  try {
    const Eigen::MatrixXd x = design(set, absolute, context, mask);
    row.n_features = static_cast<int>(x.cols());
    if (x.cols() == 0) throw FitError("no usable feature columns");
    Eigen::VectorXd y(x.rows());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = set.examples[static_cast<std::size_t>(i)].label;
    const CrossValidationResult r = cross_validate(x, y, cv);
    row.accuracy = r.holdout_accuracy;
    row.mean_fold_accuracy = 0.0;
    for (double a : r.fold_accuracies) row.mean_fold_accuracy += a / static_cast<double>(r.fold_accuracies.size());
  } catch (const Error& e) {
    row.error = e.kind() + ": " + e.what();
  }
  return row;
}

}  // namespace

ExperimentGrid run_experiment_grid(std::span<const ExampleSet> true_context, std::span<const ExampleSet> noise_context,
                                   const std::vector<std::string>& top_features, const CrossValidationConfig& cv) {
  if (true_context.size() != noise_context.size()) throw ConfigError("need one noise set per context length");
  ExperimentGrid grid;
  grid.top_features = top_features;
  std::vector<std::future<GridRow>> jobs;
  for (std::size_t i = 0; i < true_context.size(); ++i) {
    const ExampleSet& t = true_context[i];
    const ExampleSet& nz = noise_context[i];
    if (t.k != nz.k || t.examples.size() != nz.examples.size()) {
      throw ConfigError("noise set does not mirror the true-context set");
    }
    const std::vector<bool> all(t.columns.size(), true);
    std::vector<bool> top(t.columns.size(), false);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      top[c] = std::find(top_features.begin(), top_features.end(), t.columns[c]) != top_features.end();
    }
    const auto& sets = grid_feature_sets();
    auto launch = [&](const std::string& name, const ExampleSet& s, bool abs, bool ctx, std::vector<bool> mask) {
      jobs.push_back(std::async(std::launch::async, [name, &s, abs, ctx, mask = std::move(mask), cv] {
        return evaluate_row(name, s, abs, ctx, mask, cv);
      }));
    };
    launch(sets[0], t, true, false, all);
    launch(sets[1], t, true, true, all);
    launch(sets[2], t, true, true, top);
    launch(sets[3], t, false, true, all);
    launch(sets[4], nz, false, true, all);
  }
  for (auto& j : jobs) grid.rows.push_back(j.get());
  return grid;
}

ExperimentGrid context_evaluation(std::span<const SessionRecord> records, const FeatureTable& table,
                                  const ContextEvalConfig& cfg) {
  const auto accepted = accepted_sessions(records, cfg.plan);
  const SoundScores scores = score_sounds(accepted);
  std::vector<std::string> pool;
  for (const auto& rec : records) {
    for (const auto& s : rec.plan.slots) pool.push_back(s.sound_id);
  }

  std::vector<ExampleSet> truth, noise;
  for (std::size_t i = 0; i < cfg.context_lengths.size(); ++i) {
    ExampleConfig ec;
    ec.k = cfg.context_lengths[i];
    ec.lower_percentile = cfg.lower_percentile;
    ec.upper_percentile = cfg.upper_percentile;
    ec.plan = cfg.plan;
    truth.push_back(build_game_examples(accepted, table, scores, ec));
    noise.push_back(noise_baseline_examples(truth.back(), table, pool, cfg.seed + i));
  }
  const auto top = top_context_features(table, scores, cfg.n_top_high, cfg.n_top_low, cfg.ranking);
  return run_experiment_grid(truth, noise, top, cfg.cv);
}

}  // namespace audmem
