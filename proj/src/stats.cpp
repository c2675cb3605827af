#include "audmem/stats.hpp"

#include "audmem/csv.hpp"

namespace audmem {

Eigen::MatrixXd Standardizer::apply(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::Ref<const Eigen::MatrixXd>& z) const {
  return (z.array().rowwise() * scale.array()).matrix().rowwise() + mean;
}

Standardizer fit_standardizer(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().sum() / std::max<Eigen::Index>(x.rows(), 1)).sqrt();
  for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
    if (!(s.scale[c] > 0.0)) s.scale[c] = 1.0;
  }
  return s;
}

Dataset prepare_dataset(const Dataset& raw, std::vector<std::string>* dropped, Standardizer* fitted) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < raw.x.rows(); ++r) {
    if (!raw.x.row(r).hasNaN() && !std::isnan(raw.y[r])) rows.push_back(r);
  }
  std::vector<Eigen::Index> cols;
  for (Eigen::Index c = 0; c < raw.x.cols(); ++c) {
    bool varies = false;
    for (std::size_t i = 1; i < rows.size() && !varies; ++i) varies = raw.x(rows[i], c) != raw.x(rows[0], c);
    if (varies) {
      cols.push_back(c);
    } else if (dropped) {
      dropped->push_back(raw.names[static_cast<std::size_t>(c)]);
    }
  }

  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = raw.x(rows[i], cols[j]);
    out.y[static_cast<Eigen::Index>(i)] = raw.y[rows[i]];
    if (!raw.row_ids.empty()) out.row_ids.push_back(raw.row_ids[static_cast<std::size_t>(rows[i])]);
  }
  for (auto c : cols) out.names.push_back(raw.names[static_cast<std::size_t>(c)]);

  const Standardizer s = fit_standardizer(out.x);
  out.x = s.apply(out.x);
  if (fitted) *fitted = s;
  return out;
}

std::string ImportanceReport::to_csv() const {
  std::string out = "feature,individual_r2,shapley_delta_r2,n_evaluations\n";
  for (const auto& e : entries) {
    out += csv::join({e.name, csv::format_number(e.individual_r2), csv::format_number(e.shapley_delta_r2),
                      std::to_string(e.n_evaluations)});
    out += "\n";
  }
  return out;
}

const ImportanceEntry* ImportanceReport::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::optional<std::size_t> ImportanceReport::rank_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name == name) return i;
  }
  return std::nullopt;
}

}  // namespace audmem
