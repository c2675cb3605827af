#pragma once

#include "audmem/audio.hpp"
#include "audmem/salience.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace audmem {

enum class FeatureTag { low_level, salience, high_level };

std::string to_string(FeatureTag tag);

/// Tag of a column by naming convention: the ingested rating columns and any
/// `hl_` prefix are high-level, `sal_` is salience, the rest low-level.
FeatureTag infer_tag(const std::string& column);

struct FeatureColumn {
  std::string name;
  FeatureTag tag = FeatureTag::low_level;
};

/// One row per sound. Missing cells are NaN in memory and "NA" on disk.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::vector<FeatureColumn> columns);

  const std::vector<FeatureColumn>& columns() const { return columns_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index rows() const { return values_.rows(); }

  /// Appends a row; `values` must have one entry per column. Throws
  /// DuplicateKey when the id already exists.
  void add_row(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>& values);

  std::optional<Eigen::Index> row_index(const std::string& id) const;
  std::optional<Eigen::Index> column_index(const std::string& name) const;
  Eigen::VectorXd row(const std::string& id) const;
  bool row_complete(Eigen::Index r) const;

  /// Per-row extraction failures (id -> message).
  std::map<std::string, std::string> row_errors;

  std::string to_csv() const;
  static FeatureTable from_csv(const std::filesystem::path& path);
  static FeatureTable parse_csv(std::string_view text);

 private:
  std::vector<FeatureColumn> columns_;
  std::vector<std::string> ids_;
  std::map<std::string, Eigen::Index> index_;
  Eigen::MatrixXd values_;
};

struct SpectralStats {
  double avg_spectral_spread = 0.0;   ///< Hz, frame-energy-weighted mean
  double peak_spectral_spread = 0.0;  ///< Hz, at the highest-energy frame
  double avg_spectral_skew = 0.0;
  double max_energy = 0.0;            ///< max windowed-frame RMS
  bool silent = false;
};

/// Expects raw magnitudes.
SpectralStats spectral_stats(const Spectrogram& spec);

struct SubbandFlux {
  std::vector<double> avg_flux;      ///< per band
  std::vector<double> flux_entropy;  ///< per band, nats
};

SubbandFlux subband_flux_stats(const Spectrogram& spec, int n_bands = 4);

struct EnergyHpss {
  double bass_ratio = 0.0;
  double mid_ratio = 0.0;
  double treble_ratio = 0.0;
  double percussive_harmonic_ratio = 0.0;
  bool silent = false;
};

EnergyHpss energy_and_hpss(const Spectrogram& spec);

/// Median along one axis with edge replication (axis 1: along time).
Eigen::MatrixXd median_filter(const Eigen::MatrixXd& m, int length, int axis);

/// Entropy (nats) of semitone-quantized autocorrelation pitch over voiced
/// frames; 0 when nothing is voiced.
double pitch_diversity(const AudioClip& clip);

/// Autocorrelation f0 of one frame, or nullopt when unvoiced.
std::optional<double> frame_pitch(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate);

struct TimbralStats {
  double sharpness = 0.0;
  double roughness = 0.0;
};

TimbralStats timbral_stats(const AudioClip& clip);

/// Plomp-Levelt dissonance of two partials (Sethares parameterization).
double plomp_levelt(double f1, double a1, double f2, double a2);

double bark(double hz);

struct HighLevelRatings {
  std::string sound_id;
  double hcu = 0.0;
  double imageability = 0.0;
  double imageability_std = 0.0;
  double familiarity = 0.0;
  double familiarity_std = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
  double arousal_std = 0.0;
  double location_embedding_density = 0.0;
};

struct RatingsIngest {
  std::vector<HighLevelRatings> ratings;
  std::vector<std::pair<std::size_t, std::string>> rejected;  ///< (1-based data line, reason)
};

/// Throws SchemaError (missing column) or DuplicateKey.
RatingsIngest parse_high_level(std::string_view csv_text);
RatingsIngest ingest_high_level(const std::filesystem::path& path);

const std::vector<std::string>& high_level_columns();

struct FeatureConfig {
  int sample_rate = kDefaultSampleRate;
  int window_len = kDefaultWindow;
  int hop = kDefaultHop;
  double floor_db = kDefaultFloorDb;
  int flux_bands = 4;
  SalienceConfig salience;
  unsigned threads = 0;  ///< 0 = hardware concurrency
};

/// Drops leading and trailing samples more than floor_db below the clip peak.
/// Returns the clip unchanged when it is silent or the rest is shorter than min_len.
AudioClip trim_silence(const AudioClip& clip, double floor_db, Eigen::Index min_len);

/// Column layout produced by build_feature_table, in output order.
std::vector<FeatureColumn> feature_columns(const FeatureConfig& cfg = {});

/// Low-level and salience values for one clip, in feature_columns() order
/// (high-level cells are NaN).
Eigen::VectorXd extract_clip_features(const AudioClip& clip, const FeatureConfig& cfg = {},
                                      SalienceMaps* maps_out = nullptr);

FeatureTable build_feature_table(const std::vector<AudioClip>& clips,
                                 const std::vector<HighLevelRatings>& ratings,
                                 const FeatureConfig& cfg = {});

}  // namespace audmem
