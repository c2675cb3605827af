#include "audmem/error.hpp"
#include "audmem/stats.hpp"

#include <atomic>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace audmem {

namespace {

// Kernel ridge R^2 on a precomputed sum of per-column squared distances.
class SubsetScorer {
 public:
  SubsetScorer(const Dataset& ds, const RegressorConfig& cfg) : ds_(ds), cfg_(cfg) {
    const Eigen::Index n = ds.x.rows();
    yc_ = ds.y.array() - ds.y.mean();
    ss_tot_ = yc_.squaredNorm();
    if (cfg.kind == RegressorKind::rbf_kernel_ridge) {
      sqdist_.reserve(static_cast<std::size_t>(ds.x.cols()));
      for (Eigen::Index c = 0; c < ds.x.cols(); ++c) {
        const Eigen::VectorXd col = ds.x.col(c);
        Eigen::MatrixXd d(n, n);
        for (Eigen::Index j = 0; j < n; ++j) d.col(j) = (col.array() - col[j]).square();
        sqdist_.push_back(std::move(d));
      }
    }
  }

  bool fast() const { return !sqdist_.empty() || ds_.x.cols() == 0; }
  const Eigen::MatrixXd& sqdist(Eigen::Index c) const { return sqdist_[static_cast<std::size_t>(c)]; }

  /// `work` is scratch space; `dist` the summed squared distances of `d` columns.
  double kernel_ridge_r2(const Eigen::MatrixXd& dist, Eigen::Index d, Eigen::MatrixXd& work) const {
    if (!(ss_tot_ > 0.0)) return 0.0;
    const double gamma = cfg_.gamma_for(d);
    const double ridge = cfg_.ridge_for(d);
    work = (-gamma * dist).array().exp();
    work.diagonal().array() += ridge;
    Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(work);
    if (llt.info() != Eigen::Success) throw FitError("kernel system is not positive definite");
    const Eigen::VectorXd alpha = llt.solve(yc_);
    if (!alpha.allFinite()) throw FitError("non-finite kernel ridge solution");
    return 1.0 - ridge * ridge * alpha.squaredNorm() / ss_tot_;
  }

  double generic_r2(const std::vector<Eigen::Index>& cols) const {
    Eigen::MatrixXd x(ds_.x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = ds_.x.col(cols[i]);
    return fit_r2(x, ds_.y, cfg_);
  }

 private:
  const Dataset& ds_;
  const RegressorConfig& cfg_;
  Eigen::VectorXd yc_;
  double ss_tot_ = 0.0;
  std::vector<Eigen::MatrixXd> sqdist_;
};

}  // namespace

ImportanceReport shapley_importance(const Dataset& ds, const ShapleyConfig& cfg) {
  const Eigen::Index p = ds.x.cols();
  if (cfg.n_min < 1 || cfg.n_max < cfg.n_min) throw FitError("invalid base-size range");
  if (p <= cfg.n_max) {
    throw FitError("need more than " + std::to_string(cfg.n_max) + " features, have " + std::to_string(p));
  }
  if (ds.x.rows() < 10) throw FitError("need at least 10 samples");

  const SubsetScorer scorer(ds, cfg.regressor);
  const auto iterations = static_cast<std::size_t>(std::max(cfg.iterations, 0));
  // deltas[it][c]: R^2 gain of column c in iteration it; NaN when c was in the base.
  std::vector<Eigen::VectorXd> deltas(iterations);
  std::vector<char> skipped(iterations, 0);

  auto run_iteration = [&](std::size_t it, Eigen::MatrixXd& dist, Eigen::MatrixXd& cand, Eigen::MatrixXd& work) {
    std::mt19937_64 rng(cfg.seed + it);
    const int n_base = std::uniform_int_distribution<int>(cfg.n_min, cfg.n_max)(rng);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Eigen::Index> base(order.begin(), order.begin() + n_base);

    Eigen::VectorXd out = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    if (scorer.fast()) {
      dist = scorer.sqdist(base[0]);
      for (std::size_t i = 1; i < base.size(); ++i) dist += scorer.sqdist(base[i]);
      const double base_r2 = scorer.kernel_ridge_r2(dist, n_base, work);
      for (auto it_c = order.begin() + n_base; it_c != order.end(); ++it_c) {
        cand = dist + scorer.sqdist(*it_c);
        out[*it_c] = scorer.kernel_ridge_r2(cand, n_base + 1, work) - base_r2;
      }
    } else {
      const double base_r2 = scorer.generic_r2(base);
      for (auto it_c = order.begin() + n_base; it_c != order.end(); ++it_c) {
        auto cols = base;
        cols.push_back(*it_c);
        out[*it_c] = scorer.generic_r2(cols) - base_r2;
      }
    }
    deltas[it] = std::move(out);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    Eigen::MatrixXd dist, cand, work;
    for (std::size_t it = next++; it < iterations; it = next++) {
      try {
        run_iteration(it, dist, cand, work);
      } catch (const FitError&) {
        skipped[it] = 1;
      }
    }
  };
  const unsigned n_threads = std::max(1u, cfg.threads ? cfg.threads : std::thread::hardware_concurrency());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  ImportanceReport report;
  report.iterations = cfg.iterations;
  report.n_min = cfg.n_min;
  report.n_max = cfg.n_max;
  report.seed = cfg.seed;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  std::vector<long> count(static_cast<std::size_t>(p), 0);
  for (std::size_t it = 0; it < iterations; ++it) {
    if (skipped[it]) {
      ++report.skipped_iterations;
      continue;
    }
    for (Eigen::Index c = 0; c < p; ++c) {
      if (std::isnan(deltas[it][c])) continue;
      sum[c] += deltas[it][c];
      ++count[static_cast<std::size_t>(c)];
    }
  }

  std::vector<FeatureScore> individual;
  if (cfg.with_individual_r2) individual = single_feature_r2(ds, cfg.regressor);
  for (Eigen::Index c = 0; c < p; ++c) {
    const auto n = count[static_cast<std::size_t>(c)];
    if (n == 0) continue;
    ImportanceEntry e;
    e.name = ds.names.at(static_cast<std::size_t>(c));
    e.shapley_delta_r2 = sum[c] / static_cast<double>(n);
    e.n_evaluations = n;
    if (!individual.empty()) e.individual_r2 = individual[static_cast<std::size_t>(c)].r2;
    report.entries.push_back(std::move(e));
  }
  std::sort(report.entries.begin(), report.entries.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
    if (a.shapley_delta_r2 != b.shapley_delta_r2) return a.shapley_delta_r2 > b.shapley_delta_r2;
    return a.name < b.name;
  });
  return report;
}

}  // namespace audmem
