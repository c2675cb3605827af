#include "audmem/salience.hpp"

#include "audmem/error.hpp"

#include <algorithm>
#include <cmath>

namespace audmem {

namespace detail {

Eigen::VectorXd gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  Eigen::VectorXd k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  return k / k.sum();
}

Eigen::VectorXd dog_kernel(double sigma_center, double sigma_surround) {
  const Eigen::VectorXd c = gaussian_kernel(sigma_center);
  const Eigen::VectorXd s = gaussian_kernel(sigma_surround);
  const Eigen::Index radius = std::max(c.size(), s.size()) / 2;
  Eigen::VectorXd k = Eigen::VectorXd::Zero(2 * radius + 1);
  k.segment(radius - c.size() / 2, c.size()) += c;
  k.segment(radius - s.size() / 2, s.size()) -= s;
  return k;
}

Eigen::VectorXd gaussian_derivative_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const Eigen::VectorXd g = gaussian_kernel(sigma);
  Eigen::VectorXd k(2 * radius + 1);
  // Odd profile; positive response to a rising edge: (k * x)[i] = sum_j k[j] x[i - j].
  for (int i = -radius; i <= radius; ++i) k[i + radius] = i * g[i + radius] / (sigma * sigma);
  return k;
}

Eigen::MatrixXd convolve_axis(const Eigen::MatrixXd& m, const Eigen::VectorXd& kernel, int axis) {
  const Eigen::Index radius = kernel.size() / 2;
  const Eigen::Index n = axis == 0 ? m.rows() : m.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Eigen::Index j = -radius; j <= radius; ++j) {
    const double w = kernel[j + radius];
    if (w == 0.0) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = std::clamp<Eigen::Index>(i - j, 0, n - 1);
      if (axis == 0) {
        out.row(i) += w * m.row(src);
      } else {
        out.col(i) += w * m.col(src);
      }
    }
  }
  return out;
}

Eigen::MatrixXd pad_to(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  rows = std::max(rows, m.rows());
  cols = std::max(cols, m.cols());
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const Eigen::Index sc = std::min(c, m.cols() - 1);
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = m(std::min(r, m.rows() - 1), sc);
  }
  return out;
}

Eigen::MatrixXd pyramid_reduce(const Eigen::MatrixXd& m) {
  Eigen::VectorXd binomial(5);
  binomial << 1, 4, 6, 4, 1;
  binomial /= 16.0;
  const Eigen::MatrixXd blurred = convolve_axis(convolve_axis(m, binomial, 0), binomial, 1);
  const Eigen::Index rows = (m.rows() + 1) / 2;
  const Eigen::Index cols = (m.cols() + 1) / 2;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = blurred(2 * r, 2 * c);
  return out;
}

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  auto source = [](Eigen::Index dst, Eigen::Index n_dst, Eigen::Index n_src) {
    const double x = (dst + 0.5) * static_cast<double>(n_src) / n_dst - 0.5;
    return std::clamp(x, 0.0, static_cast<double>(n_src - 1));
  };
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    const double x = source(c, cols, m.cols());
    const auto c0 = static_cast<Eigen::Index>(x);
    const auto c1 = std::min(c0 + 1, m.cols() - 1);
    const double fc = x - c0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double y = source(r, rows, m.rows());
      const auto r0 = static_cast<Eigen::Index>(y);
      const auto r1 = std::min(r0 + 1, m.rows() - 1);
      const double fr = y - r0;
      out(r, c) = (1 - fr) * ((1 - fc) * m(r0, c0) + fc * m(r0, c1)) +
                  fr * ((1 - fc) * m(r1, c0) + fc * m(r1, c1));
    }
  }
  return out;
}

std::array<Eigen::MatrixXd, 3> channel_images(const Eigen::MatrixXd& image, const SalienceConfig& cfg) {
  const Eigen::VectorXd dog = dog_kernel(cfg.sigma_center, cfg.sigma_surround);
  const Eigen::VectorXd smooth = gaussian_kernel(cfg.sigma_elongated);
  const Eigen::VectorXd deriv = gaussian_derivative_kernel(cfg.sigma_temporal);

  // Frequency channel: contrast across frequency (axis 0), smoothed along time.
  Eigen::MatrixXd frequency = convolve_axis(convolve_axis(image, smooth, 1), dog, 0);
  // Temporal channel: onset/offset detector along time, smoothed along frequency.
  Eigen::MatrixXd temporal = convolve_axis(convolve_axis(image, smooth, 0), deriv, 1).cwiseAbs();
  return {image, std::move(frequency), std::move(temporal)};
}

}  // namespace detail

void SalienceConfig::validate() const {
  if (pyramid_levels < 2) throw ConfigError("pyramid_levels must be >= 2");
  if (center_levels.empty() || surround_deltas.empty()) {
    throw ConfigError("center_levels and surround_deltas must be nonempty");
  }
  const int max_c = *std::max_element(center_levels.begin(), center_levels.end());
  const int min_c = *std::min_element(center_levels.begin(), center_levels.end());
  const int max_d = *std::max_element(surround_deltas.begin(), surround_deltas.end());
  const int min_d = *std::min_element(surround_deltas.begin(), surround_deltas.end());
  if (min_c < 0 || min_d < 1) throw ConfigError("levels must be >= 0 and deltas >= 1");
  if (max_c + max_d >= pyramid_levels) {
    throw ConfigError("max(center) + max(delta) = " + std::to_string(max_c + max_d) +
                      " must be < pyramid_levels = " + std::to_string(pyramid_levels));
  }
  if (sigma_center <= 0 || sigma_surround <= 0 || sigma_elongated <= 0 || sigma_temporal <= 0) {
    throw ConfigError("kernel widths must be positive");
  }
  if (sigma_elongated < sigma_center) throw ConfigError("elongation ratio must be >= 1");
}

int SalienceConfig::output_level() const {
  return *std::min_element(center_levels.begin(), center_levels.end());
}

namespace {

Eigen::MatrixXd conspicuity(const Eigen::MatrixXd& channel, const SalienceConfig& cfg) {
  std::vector<Eigen::MatrixXd> pyramid{channel};
  pyramid.reserve(static_cast<std::size_t>(cfg.pyramid_levels));
  for (int l = 1; l < cfg.pyramid_levels; ++l) pyramid.push_back(detail::pyramid_reduce(pyramid.back()));

  const auto& target = pyramid[static_cast<std::size_t>(cfg.output_level())];
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(target.rows(), target.cols());
  for (int c : cfg.center_levels) {
    const auto& center = pyramid[static_cast<std::size_t>(c)];
    for (int d : cfg.surround_deltas) {
      const auto& surround = pyramid[static_cast<std::size_t>(c + d)];
      Eigen::MatrixXd cs =
          (center - detail::resize_bilinear(surround, center.rows(), center.cols())).cwiseAbs();
      const double lo = cs.minCoeff();
      const double hi = cs.maxCoeff();
      if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) continue;  // flat map carries no contrast
      cs = (cs.array() - lo) / (hi - lo);
      if (cfg.peak_promotion) {
        const double promote = 1.0 - cs.mean();
        cs *= promote * promote;
      }
      acc += detail::resize_bilinear(cs, target.rows(), target.cols());
    }
  }
  return acc;
}

}  // namespace

SalienceMaps salience_maps(const Eigen::MatrixXd& image, const SalienceConfig& cfg) {
  cfg.validate();
  if (image.size() == 0) throw ConfigError("empty spectrogram");
  const Eigen::MatrixXd padded = detail::pad_to(image, cfg.min_size, cfg.min_size);
  const auto channels = detail::channel_images(padded, cfg);
  SalienceMaps maps;
  maps.intensity = conspicuity(channels[0], cfg);
  maps.frequency = conspicuity(channels[1], cfg);
  maps.temporal = conspicuity(channels[2], cfg);
  return maps;
}

SalienceMaps salience_maps(const Spectrogram& spec, const SalienceConfig& cfg) {
  if (!spec.log_compressed) throw ConfigError("salience expects a log-compressed spectrogram");
  SalienceMaps maps = salience_maps(spec.values, cfg);
  const double scale = std::ldexp(1.0, cfg.output_level());
  maps.cell_hz = spec.freq_bin_hz * scale;
  maps.cell_s = spec.frame_hop_s * scale;
  return maps;
}

double weighted_index_skewness(const Eigen::Ref<const Eigen::VectorXd>& weights) {
  const double mass = weights.sum();
  if (!(mass > 0.0)) return 0.0;
  const Eigen::ArrayXd idx = Eigen::ArrayXd::LinSpaced(weights.size(), 0.0, weights.size() - 1.0);
  const Eigen::ArrayXd p = weights.array() / mass;
  const double mu = (p * idx).sum();
  const Eigen::ArrayXd dev = idx - mu;
  const double var = (p * dev.square()).sum();
  if (!(var > 1e-18)) return 0.0;
  return (p * dev.cube()).sum() / std::pow(var, 1.5);
}

const std::vector<std::string>& salience_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const char* ch : {"intensity", "frequency", "temporal"}) {
      for (const char* stat : {"peak", "mean", "freq_skew", "time_skew", "peak_time_s", "peak_freq_hz"}) {
        out.push_back(std::string("sal_") + ch + "_" + stat);
      }
    }
    return out;
  }();
  return names;
}

std::vector<std::pair<std::string, double>> salience_summary(const SalienceMaps& maps) {
  std::vector<std::pair<std::string, double>> out;
  const auto& names = salience_feature_names();
  std::size_t k = 0;
  for (const Eigen::MatrixXd* m : {&maps.intensity, &maps.frequency, &maps.temporal}) {
    double peak = 0.0, mean = 0.0, fskew = 0.0, tskew = 0.0, peak_t = 0.0, peak_f = 0.0;
    if (m->size() > 0) {
      Eigen::Index r = 0, c = 0;
      peak = m->maxCoeff(&r, &c);
      mean = m->mean();
      fskew = weighted_index_skewness(m->rowwise().sum());
      tskew = weighted_index_skewness(m->colwise().sum().transpose());
      if (peak > 0.0) {
        peak_t = static_cast<double>(c) * maps.cell_s;
        peak_f = static_cast<double>(r) * maps.cell_hz;
      }
    }
    for (double v : {peak, mean, fskew, tskew, peak_t, peak_f}) out.emplace_back(names[k++], v);
  }
  return out;
}

}  // namespace audmem
