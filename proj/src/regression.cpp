#include "audmem/error.hpp"
#include "audmem/stats.hpp"

#include <limits>

namespace audmem {

double RegressorConfig::gamma_for(Eigen::Index n_features) const {
  return gamma > 0.0 ? gamma : 1.0 / static_cast<double>(std::max<Eigen::Index>(n_features, 1));
}

double RegressorConfig::ridge_for(Eigen::Index n_features) const {
  return ridge > 0.0 ? ridge : ridge_per_feature * static_cast<double>(std::max<Eigen::Index>(n_features, 1));
}

Eigen::MatrixXd rbf_kernel(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                           double gamma) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * a * b.transpose()).colwise() + na;
  d.rowwise() += nb.transpose();
  return (-gamma * d.cwiseMax(0.0)).array().exp();
}

double r2(const Eigen::Ref<const Eigen::VectorXd>& predicted, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (!(ss_tot > 0.0)) return 0.0;
  return 1.0 - (y - predicted).squaredNorm() / ss_tot;
}

namespace {

RegressorModel fit_kernel_ridge(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                                const RegressorConfig& cfg) {
  RegressorModel m;
  m.kind = RegressorKind::rbf_kernel_ridge;
  m.gamma = cfg.gamma_for(x.cols());
  m.ridge = cfg.ridge_for(x.cols());
  m.support = x;
  m.intercept = y.mean();

  Eigen::MatrixXd system = rbf_kernel(x, x, m.gamma);
  system.diagonal().array() += m.ridge;
  const Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw FitError("kernel system is not positive definite");
  m.coef = llt.solve((y.array() - m.intercept).matrix());
  if (!m.coef.allFinite()) throw FitError("kernel ridge produced non-finite coefficients");
  return m;
}

// epsilon-SVR dual over 2n variables (a_i for +eps side, a*_i for -eps side),
// solved by SMO with second-order working-set selection.
RegressorModel fit_svr(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                       const RegressorConfig& cfg) {
  const Eigen::Index n = x.rows();
  const Eigen::Index l = 2 * n;
  const double c = cfg.svr_c;
  const double eps = cfg.svr_epsilon;
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  RegressorModel m;
  m.kind = RegressorKind::epsilon_svr;
  m.gamma = cfg.gamma_for(x.cols());
  m.svr_c = c;
  m.svr_epsilon = eps;
  m.support = x;

  const Eigen::MatrixXd k = rbf_kernel(x, x, m.gamma);
  auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
  auto q = [&](Eigen::Index a, Eigen::Index b) { return sign(a) * sign(b) * k(a % n, b % n); };

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(l);
  Eigen::VectorXd grad(l);
  for (Eigen::Index t = 0; t < n; ++t) {
    grad[t] = eps - y[t];
    grad[t + n] = eps + y[t];
  }
  auto at_upper = [&](Eigen::Index t) { return alpha[t] >= c; };
  auto at_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

  int iter = 0;
  for (; iter < cfg.svr_max_iterations; ++iter) {
    double gmax = -kInf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < l; ++t) {
      if (sign(t) > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) { gmax = -grad[t]; i = t; }
      } else {
        if (!at_lower(t) && grad[t] >= gmax) { gmax = grad[t]; i = t; }
      }
    }
    double gmax2 = -kInf, best = kInf;
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < l && i >= 0; ++t) {
      if (sign(t) > 0) {
        if (at_lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = 1.0 + 1.0 - 2.0 * sign(i) * q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= best) { best = obj; j = t; }
        }
      } else {
        if (at_upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = 1.0 + 1.0 + 2.0 * sign(i) * q(i, t);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= best) { best = obj; j = t; }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < cfg.svr_tolerance) break;

    const double old_i = alpha[i], old_j = alpha[j];
    const double qij = q(i, j);
    if (sign(i) != sign(j)) {
      double quad = 2.0 + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (Eigen::Index t = 0; t < l; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }
  if (iter >= cfg.svr_max_iterations) throw FitError("SMO did not converge");

  double ub = kInf, lb = -kInf, free_sum = 0.0;
  int n_free = 0;
  for (Eigen::Index t = 0; t < l; ++t) {
    const double yg = sign(t) * grad[t];
    if (at_upper(t)) {
      if (sign(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (sign(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / n_free : 0.5 * (ub + lb);
  m.coef = alpha.head(n) - alpha.tail(n);
  m.intercept = -rho;
  if (!m.coef.allFinite() || !std::isfinite(m.intercept)) throw FitError("SVR produced non-finite coefficients");
  return m;
}

}  // namespace

RegressorModel fit_regressor(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const RegressorConfig& cfg) {
  if (x.rows() != y.size()) throw FitError("x and y row counts differ");
  if (x.rows() < 2 || x.cols() < 1) throw FitError("need at least 2 samples and 1 feature");
  if (!x.allFinite() || !y.allFinite()) throw FitError("non-finite training data");
  return cfg.kind == RegressorKind::rbf_kernel_ridge ? fit_kernel_ridge(x, y, cfg) : fit_svr(x, y, cfg);
}

Eigen::VectorXd predict(const RegressorModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return (rbf_kernel(x, model.support, model.gamma) * model.coef).array() + model.intercept;
}

double fit_r2(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y,
              const RegressorConfig& cfg) {
  const RegressorModel m = fit_regressor(x, y, cfg);
  if (m.kind == RegressorKind::rbf_kernel_ridge) {
    // In-sample residual of kernel ridge is ridge * alpha.
    const double ss_tot = (y.array() - y.mean()).square().sum();
    if (!(ss_tot > 0.0)) return 0.0;
    return 1.0 - m.ridge * m.ridge * m.coef.squaredNorm() / ss_tot;
  }
  return r2(predict(m, x), y);
}

std::vector<FeatureScore> single_feature_r2(const Dataset& ds, const RegressorConfig& cfg) {
  std::vector<FeatureScore> out;
  for (Eigen::Index c = 0; c < ds.x.cols(); ++c) {
    FeatureScore s{ds.names.at(static_cast<std::size_t>(c)), 0.0, std::nullopt};
    try {
      s.r2 = fit_r2(ds.x.col(c), ds.y, cfg);
    } catch (const FitError& e) {
      s.r2 = std::numeric_limits<double>::quiet_NaN();
      s.error = e.what();
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace audmem
