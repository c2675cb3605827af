#pragma once

#include "audmem/audio.hpp"

#include <Eigen/Dense>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace audmem {

/// Center-surround salience parameters. Levels are indexed 0..pyramid_levels-1
/// with level 0 the (padded) input; every (c, c + delta) pair must exist.
struct SalienceConfig {
  int pyramid_levels = 7;
  std::vector<int> center_levels{2, 3};
  std::vector<int> surround_deltas{2, 3};
  double sigma_center = 1.0;     ///< DoG center width along the contrast axis
  double sigma_surround = 4.0;   ///< DoG surround width along the contrast axis
  double sigma_elongated = 8.0;  ///< smoothing width along the elongated axis
  double sigma_temporal = 1.0;   ///< derivative-of-Gaussian width along time
  int min_size = 64;             ///< inputs smaller than this are edge-padded
  bool peak_promotion = true;    ///< scale each map by (max - mean)^2

  void validate() const;
  int output_level() const;
};

/// Three conspicuity maps at the resolution of the finest center level.
struct SalienceMaps {
  Eigen::MatrixXd intensity;
  Eigen::MatrixXd frequency;
  Eigen::MatrixXd temporal;
  double cell_hz = 0.0;  ///< frequency span of one map row
  double cell_s = 0.0;   ///< time span of one map column
};

/// Expects a log-compressed spectrogram (rows = frequency, cols = time).
SalienceMaps salience_maps(const Spectrogram& spec, const SalienceConfig& cfg = {});

/// Same pipeline on a bare matrix; used when the caller already holds a
/// normalized time-frequency image.
SalienceMaps salience_maps(const Eigen::MatrixXd& image, const SalienceConfig& cfg = {});

/// 18 named scalars: for each channel (intensity, frequency, temporal) the
/// peak, mean, frequency-marginal skew, time-marginal skew, peak time (s) and
/// peak frequency (Hz). Key format: `sal_<channel>_<stat>`.
std::vector<std::pair<std::string, double>> salience_summary(const SalienceMaps& maps);

/// Names emitted by salience_summary, in order.
const std::vector<std::string>& salience_feature_names();

/// Skewness of a nonnegative weight profile over its indices. Returns 0 when
/// the total mass or the variance is zero.
double weighted_index_skewness(const Eigen::Ref<const Eigen::VectorXd>& weights);

namespace detail {

Eigen::VectorXd gaussian_kernel(double sigma);
Eigen::VectorXd dog_kernel(double sigma_center, double sigma_surround);
Eigen::VectorXd gaussian_derivative_kernel(double sigma);

/// 1-D convolution along columns (axis 0, i.e. down each column) or rows
/// (axis 1) with edge replication. Kernels are centered.
Eigen::MatrixXd convolve_axis(const Eigen::MatrixXd& m, const Eigen::VectorXd& kernel, int axis);

Eigen::MatrixXd pad_to(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols);
Eigen::MatrixXd pyramid_reduce(const Eigen::MatrixXd& m);
Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols);

/// Intensity, frequency and temporal channel images before the pyramid.
std::array<Eigen::MatrixXd, 3> channel_images(const Eigen::MatrixXd& image, const SalienceConfig& cfg);

}  // namespace detail

}  // namespace audmem
