#include "audmem/error.hpp"
#include "audmem/stats.hpp"

#include <array>
#include <random>

namespace audmem {

namespace {

Eigen::ArrayXd softplus(const Eigen::ArrayXd& z) {
  return z.max(0.0) + (-z.abs()).exp().log1p();
}

Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) {
  // Branch-free stable form: exp(min(z,0)) / (1 + exp(-|z|)).
  return z.min(0.0).exp() / (1.0 + (-z.abs()).exp());
}

void check_labels(const Eigen::Ref<const Eigen::VectorXd>& labels) {
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0.0) {
      has0 = true;
    } else if (labels[i] == 1.0) {
      has1 = true;
    } else {
      throw DegenerateLabels("labels must be 0 or 1");
    }
  }
  if (!has0 || !has1) throw DegenerateLabels("both classes must be present");
}

}  // namespace

double logistic_objective(const Eigen::Ref<const Eigen::VectorXd>& weights, double bias,
                          const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                          double l2) {
  const Eigen::ArrayXd z = (x * weights).array() + bias;
  const double loss = (softplus(z) - labels.array() * z).mean();
  return loss + 0.5 * l2 * weights.squaredNorm();
}

Eigen::VectorXd logistic_gradient(const Eigen::Ref<const Eigen::VectorXd>& weights, double bias,
                                  const Eigen::Ref<const Eigen::MatrixXd>& x,
                                  const Eigen::Ref<const Eigen::VectorXd>& labels, double l2) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::VectorXd resid = (sigmoid((x * weights).array() + bias) - labels.array()).matrix();
  Eigen::VectorXd g(weights.size() + 1);
  g.head(weights.size()) = x.transpose() * resid / n + l2 * weights;
  g[weights.size()] = resid.sum() / n;
  return g;
}

LogisticModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                           double l2, double tolerance, int max_iterations) {
  if (x.rows() != labels.size()) throw DegenerateLabels("x and labels row counts differ");
  check_labels(labels);
  const Eigen::Index d = x.cols();
  const auto n = static_cast<double>(x.rows());

  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(d);
  const double rate = labels.mean();
  m.bias = std::log(rate / (1.0 - rate));

  // Damped Newton steps with Armijo backtracking; gradient norm is the stop rule.
  double f = logistic_objective(m.weights, m.bias, x, labels, l2);
  for (; m.iterations < max_iterations; ++m.iterations) {
    const Eigen::VectorXd g = logistic_gradient(m.weights, m.bias, x, labels, l2);
    m.gradient_norm = g.norm();
    if (m.gradient_norm <= tolerance) break;

    const Eigen::ArrayXd p = sigmoid((x * m.weights).array() + m.bias);
    const Eigen::ArrayXd w = p * (1.0 - p) / n;
    Eigen::MatrixXd h(d + 1, d + 1);
    h.topLeftCorner(d, d) = x.transpose() * (x.array().colwise() * w).matrix();
    h.topLeftCorner(d, d).diagonal().array() += l2;
    h.topRightCorner(d, 1) = (x.array().colwise() * w).colwise().sum().transpose();
    h.bottomLeftCorner(1, d) = h.topRightCorner(d, 1).transpose();
    h(d, d) = w.sum();
    h.diagonal().array() += 1e-12;
    Eigen::VectorXd step = h.ldlt().solve(-g);
    if (!step.allFinite() || g.dot(step) >= 0.0) step = -g;

    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::VectorXd w_new = m.weights + t * step.head(d);
      const double b_new = m.bias + t * step[d];
      const double f_new = logistic_objective(w_new, b_new, x, labels, l2);
      if (f_new <= f + 1e-4 * t * g.dot(step)) {
        m.weights = w_new;
        m.bias = b_new;
        f = f_new;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  m.gradient_norm = logistic_gradient(m.weights, m.bias, x, labels, l2).norm();
  return m;
}

Eigen::VectorXd predict_proba(const LogisticModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  return sigmoid((x * model.weights).array() + model.bias).matrix();
}

double accuracy(const LogisticModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::VectorXd>& labels) {
  if (labels.size() == 0) return 0.0;
  const Eigen::VectorXd p = predict_proba(model, x);
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) correct += ((p[i] >= 0.5) == (labels[i] == 1.0));
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd take(const Eigen::Ref<const Eigen::VectorXd>& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

double train_and_score(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::VectorXd>& labels,
                       const std::vector<Eigen::Index>& train, const std::vector<Eigen::Index>& test, double l2) {
  const Eigen::MatrixXd xtr = take_rows(x, train);
  const Standardizer s = fit_standardizer(xtr);
  const LogisticModel model = fit_logistic(s.apply(xtr), take(labels, train), l2);
  return accuracy(model, s.apply(take_rows(x, test)), take(labels, test));
}

}  // namespace

CrossValidationResult cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& labels,
                                     const CrossValidationConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (n < 20) throw StratifyError("need at least 20 rows, have " + std::to_string(n));
  if (cfg.folds < 2) throw StratifyError("need at least 2 folds");
  check_labels(labels);

  std::array<std::vector<Eigen::Index>, 2> by_class;
  for (Eigen::Index i = 0; i < n; ++i) by_class[labels[i] == 1.0 ? 1 : 0].push_back(i);
  for (const auto& rows : by_class) {
    if (static_cast<int>(rows.size()) < cfg.folds + 1) {
      throw StratifyError("a class has " + std::to_string(rows.size()) + " rows, need at least " +
                          std::to_string(cfg.folds + 1));
    }
  }

  std::mt19937_64 rng(cfg.seed);
  for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng);

  // Largest-remainder allocation of the holdout across classes.
  const auto total_holdout = static_cast<std::size_t>(std::llround(cfg.holdout * static_cast<double>(n)));
  std::array<std::size_t, 2> take_n{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double exact = cfg.holdout * static_cast<double>(by_class[static_cast<std::size_t>(c)].size());
    take_n[static_cast<std::size_t>(c)] = static_cast<std::size_t>(std::floor(exact));
    remainder[static_cast<std::size_t>(c)] = exact - std::floor(exact);
    assigned += take_n[static_cast<std::size_t>(c)];
  }
  while (assigned < total_holdout) {
    const std::size_t c = remainder[0] >= remainder[1] ? 0 : 1;
    ++take_n[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  CrossValidationResult out;
  out.fold_of.assign(static_cast<std::size_t>(n), -1);
  std::size_t counter = 0;
  for (int c = 0; c < 2; ++c) {
    const auto& rows = by_class[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i < take_n[static_cast<std::size_t>(c)]) {
        out.holdout_rows.push_back(rows[i]);
      } else {
        out.fold_of[static_cast<std::size_t>(rows[i])] = static_cast<int>(counter++ % static_cast<std::size_t>(cfg.folds));
      }
    }
  }
  std::sort(out.holdout_rows.begin(), out.holdout_rows.end());

  std::vector<Eigen::Index> all_train;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.fold_of[static_cast<std::size_t>(i)] >= 0) all_train.push_back(i);
  }
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i : all_train) (out.fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
    out.fold_accuracies.push_back(train_and_score(x, labels, train, test, cfg.l2));
  }
  out.holdout_accuracy = train_and_score(x, labels, all_train, out.holdout_rows, cfg.l2);
  return out;
}

}  // namespace audmem
