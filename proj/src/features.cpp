#include "audmem/features.hpp"

#include "audmem/csv.hpp"
#include "audmem/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace audmem {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSilenceEnergy = 1e-20;

double entropy_nats(const std::vector<double>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

// Windowed-frame power via Parseval from a one-sided magnitude column.
double frame_power(const Eigen::Ref<const Eigen::VectorXd>& mag, int window_len) {
  const Eigen::Index last = mag.size() - 1;
  double acc = mag[0] * mag[0] + mag[last] * mag[last];
  acc += 2.0 * mag.segment(1, last - 1).squaredNorm();
  return acc / window_len;
}

}  // namespace

std::string to_string(FeatureTag tag) {
  switch (tag) {
    case FeatureTag::low_level: return "low_level";
    case FeatureTag::salience: return "salience";
    case FeatureTag::high_level: return "high_level";
  }
  return "low_level";
}

const std::vector<std::string>& high_level_columns() {
  static const std::vector<std::string> cols{
      "hcu",         "imageability", "imageability_std", "familiarity",
      "familiarity_std", "valence",  "arousal",          "arousal_std",
      "location_embedding_density"};
  return cols;
}

FeatureTag infer_tag(const std::string& column) {
  const auto& hl = high_level_columns();
  if (std::find(hl.begin(), hl.end(), column) != hl.end() || column.rfind("hl_", 0) == 0) {
    return FeatureTag::high_level;
  }
  if (column.rfind("sal_", 0) == 0) return FeatureTag::salience;
  return FeatureTag::low_level;
}

// ---------------------------------------------------------------------------
// FeatureTable

FeatureTable::FeatureTable(std::vector<FeatureColumn> columns) : columns_(std::move(columns)) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (!seen.insert(c.name).second) throw DuplicateKey("duplicate column " + c.name);
  }
  values_.resize(0, static_cast<Eigen::Index>(columns_.size()));
}

void FeatureTable::add_row(const std::string& id, const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() != static_cast<Eigen::Index>(columns_.size())) {
    throw SchemaError("row " + id + " has " + std::to_string(values.size()) + " values, expected " +
                      std::to_string(columns_.size()));
  }
  if (index_.count(id)) throw DuplicateKey("duplicate sound_id " + id);
  const Eigen::Index r = values_.rows();
  values_.conservativeResize(r + 1, Eigen::NoChange);
  values_.row(r) = values.transpose();
  ids_.push_back(id);
  index_[id] = r;
}

std::optional<Eigen::Index> FeatureTable::row_index(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Eigen::Index> FeatureTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

Eigen::VectorXd FeatureTable::row(const std::string& id) const {
  const auto r = row_index(id);
  if (!r) throw SchemaError("unknown sound_id " + id);
  return values_.row(*r).transpose();
}

bool FeatureTable::row_complete(Eigen::Index r) const { return !values_.row(r).hasNaN(); }

std::string FeatureTable::to_csv() const {
  std::string out = "sound_id";
  for (const auto& c : columns_) out += "," + csv::escape(c.name);
  out += "\n";
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    out += csv::escape(ids_[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < values_.cols(); ++c) out += "," + csv::format_number(values_(r, c));
    out += "\n";
  }
  return out;
}

FeatureTable FeatureTable::parse_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0].empty() || rows[0][0] != "sound_id") {
    throw SchemaError("feature table must start with a sound_id column");
  }
  std::vector<FeatureColumn> cols;
  for (std::size_t i = 1; i < rows[0].size(); ++i) cols.push_back({rows[0][i], infer_tag(rows[0][i])});
  FeatureTable table(std::move(cols));
  Eigen::VectorXd v(static_cast<Eigen::Index>(table.columns().size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw SchemaError("line " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                        " fields, header has " + std::to_string(rows[0].size()));
    }
    for (std::size_t c = 1; c < rows[r].size(); ++c) {
      const auto num = csv::parse_number(rows[r][c]);
      if (!num) throw SchemaError("line " + std::to_string(r + 1) + ": not a number: " + rows[r][c]);
      v[static_cast<Eigen::Index>(c - 1)] = *num;
    }
    table.add_row(rows[r][0], v);
  }
  return table;
}

FeatureTable FeatureTable::from_csv(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// Spectral shape

SpectralStats spectral_stats(const Spectrogram& spec) {
  SpectralStats out;
  const Eigen::Index bins = spec.bins();
  const Eigen::ArrayXd freqs = Eigen::ArrayXd::LinSpaced(bins, 0.0, (bins - 1) * spec.freq_bin_hz);

  double weight_total = 0.0, spread_acc = 0.0, skew_acc = 0.0, best_energy = -1.0;
  for (Eigen::Index t = 0; t < spec.frames(); ++t) {
    const auto col = spec.values.col(t);
    const double energy = col.squaredNorm();
    out.max_energy = std::max(out.max_energy, std::sqrt(frame_power(col, spec.window_len) / spec.window_len));
    if (!(energy > kSilenceEnergy)) continue;
    // Power weighting keeps a windowed pure tone under one bin of spread.
    const Eigen::ArrayXd p = col.array().square() / energy;
    const double mu = (p * freqs).sum();
    const Eigen::ArrayXd dev = freqs - mu;
    const double var = (p * dev.square()).sum();
    const double spread = std::sqrt(var);
    const double skew = var > 0.0 ? (p * dev.cube()).sum() / (var * spread) : 0.0;
    weight_total += energy;
    spread_acc += energy * spread;
    skew_acc += energy * skew;
    if (energy > best_energy) {
      best_energy = energy;
      out.peak_spectral_spread = spread;
    }
  }
  if (!(weight_total > 0.0)) {
    return SpectralStats{0.0, 0.0, 0.0, 0.0, true};
  }
  out.avg_spectral_spread = spread_acc / weight_total;
  out.avg_spectral_skew = skew_acc / weight_total;
  return out;
}

// ---------------------------------------------------------------------------
// Sub-band flux

SubbandFlux subband_flux_stats(const Spectrogram& spec, int n_bands) {
  if (n_bands < 1) throw ConfigError("n_bands must be >= 1");
  if (spec.frames() < 2) throw InsufficientAudio("flux needs at least 2 frames");
  const Eigen::Index bins = spec.bins();
  const double f_lo = spec.freq_bin_hz;
  const double f_hi = (bins - 1) * spec.freq_bin_hz;

  // Log-spaced band edges over bins 1..bins-1 (DC excluded).
  std::vector<int> band_of(static_cast<std::size_t>(bins), -1);
  for (Eigen::Index k = 1; k < bins; ++k) {
    const double f = k * spec.freq_bin_hz;
    const double pos = std::log(f / f_lo) / std::log(f_hi / f_lo) * n_bands;
    band_of[static_cast<std::size_t>(k)] = std::clamp(static_cast<int>(pos), 0, n_bands - 1);
  }

  SubbandFlux out;
  constexpr int kHistBins = 16;
  for (int b = 0; b < n_bands; ++b) {
    std::vector<double> flux;
    flux.reserve(static_cast<std::size_t>(spec.frames() - 1));
    for (Eigen::Index t = 1; t < spec.frames(); ++t) {
      double acc = 0.0;
      for (Eigen::Index k = 1; k < bins; ++k) {
        if (band_of[static_cast<std::size_t>(k)] != b) continue;
        acc += std::max(0.0, spec.values(k, t) - spec.values(k, t - 1));
      }
      flux.push_back(acc);
    }
    const double mean = std::accumulate(flux.begin(), flux.end(), 0.0) / static_cast<double>(flux.size());
    const double peak = *std::max_element(flux.begin(), flux.end());
    double h = 0.0;
    if (peak > 0.0) {
      std::vector<double> hist(kHistBins, 0.0);
      for (double f : flux) hist[static_cast<std::size_t>(std::min(kHistBins - 1, static_cast<int>(f / peak * kHistBins)))] += 1.0;
      h = entropy_nats(hist);
    }
    out.avg_flux.push_back(mean);
    out.flux_entropy.push_back(h);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Band energies and harmonic/percussive balance

Eigen::MatrixXd median_filter(const Eigen::MatrixXd& m, int length, int axis) {
  const int half = length / 2;
  Eigen::MatrixXd out(m.rows(), m.cols());
  std::vector<double> window(static_cast<std::size_t>(length));
  const Eigen::Index n = axis == 1 ? m.cols() : m.rows();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const Eigen::Index center = axis == 1 ? c : r;
      for (int j = -half; j <= half; ++j) {
        const Eigen::Index idx = std::clamp<Eigen::Index>(center + j, 0, n - 1);
        window[static_cast<std::size_t>(j + half)] = axis == 1 ? m(r, idx) : m(idx, c);
      }
      std::nth_element(window.begin(), window.begin() + half, window.end());
      out(r, c) = window[static_cast<std::size_t>(half)];
    }
  }
  return out;
}

EnergyHpss energy_and_hpss(const Spectrogram& spec) {
  EnergyHpss out;
  const double nyquist = (spec.bins() - 1) * spec.freq_bin_hz;
  double bass = 0.0, mid = 0.0, treble = 0.0;
  for (Eigen::Index k = 0; k < spec.bins(); ++k) {
    const double f = k * spec.freq_bin_hz;
    const double e = spec.values.row(k).squaredNorm();
    if (f >= 20.0 && f < 250.0) {
      bass += e;
    } else if (f >= 250.0 && f < 4000.0) {
      mid += e;
    } else if (f >= 4000.0 && f <= nyquist) {
      treble += e;
    }
  }
  const double total = bass + mid + treble;
  if (!(total > kSilenceEnergy)) {
    out.silent = true;
    return out;
  }
  out.bass_ratio = bass / total;
  out.mid_ratio = mid / total;
  out.treble_ratio = treble / total;

  constexpr int kMedian = 17;
  const Eigen::MatrixXd harmonic = median_filter(spec.values, kMedian, 1);
  const Eigen::MatrixXd percussive = median_filter(spec.values, kMedian, 0);
  out.percussive_harmonic_ratio = percussive.squaredNorm() / (harmonic.squaredNorm() + 1e-12);
  return out;
}

// ---------------------------------------------------------------------------
// Pitch

std::optional<double> frame_pitch(const Eigen::Ref<const Eigen::VectorXd>& frame, int sample_rate) {
  constexpr double kMinHz = 50.0, kMaxHz = 2000.0, kVoicing = 0.5, kFirstPeak = 0.9;
  const auto n = frame.size();
  const auto lag_min = static_cast<Eigen::Index>(std::floor(sample_rate / kMaxHz));
  const auto lag_max = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(sample_rate / kMinHz)), n - 2);
  if (lag_max <= lag_min + 1) return std::nullopt;
  if (!(frame.squaredNorm() > 1e-12)) return std::nullopt;

  // Raw autocorrelation by zero-padded FFT.
  Eigen::Index nfft = 1;
  while (nfft < 2 * n) nfft <<= 1;
  std::vector<double> padded(static_cast<std::size_t>(nfft), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = frame[i];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  for (auto& z : spec) z = std::norm(z);
  std::vector<double> acf;
  fft.inv(acf, spec);

  // Normalize by the energies of the two overlapping segments.
  std::vector<double> cum(static_cast<std::size_t>(n + 1), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) cum[static_cast<std::size_t>(i + 1)] = cum[static_cast<std::size_t>(i)] + frame[i] * frame[i];
  auto normalized = [&](Eigen::Index lag) {
    const double head = cum[static_cast<std::size_t>(n - lag)];
    const double tail = cum[static_cast<std::size_t>(n)] - cum[static_cast<std::size_t>(lag)];
    const double denom = std::sqrt(head * tail);
    return denom > 0.0 ? acf[static_cast<std::size_t>(lag)] / denom : 0.0;
  };

  std::vector<double> r(static_cast<std::size_t>(lag_max + 2), 0.0);
  double best = -1.0;
  for (Eigen::Index lag = lag_min; lag <= lag_max + 1; ++lag) {
    r[static_cast<std::size_t>(lag)] = normalized(lag);
    if (lag <= lag_max) best = std::max(best, r[static_cast<std::size_t>(lag)]);
  }
  if (best < kVoicing) return std::nullopt;

  // First local maximum close to the global one avoids octave-down errors.
  for (Eigen::Index lag = lag_min + 1; lag <= lag_max; ++lag) {
    const double v = r[static_cast<std::size_t>(lag)];
    if (v < kFirstPeak * best) continue;
    if (v < r[static_cast<std::size_t>(lag - 1)] || v < r[static_cast<std::size_t>(lag + 1)]) continue;
    const double a = r[static_cast<std::size_t>(lag - 1)], b = v, c = r[static_cast<std::size_t>(lag + 1)];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    return sample_rate / (static_cast<double>(lag) + std::clamp(shift, -0.5, 0.5));
  }
  return std::nullopt;
}

double pitch_diversity(const AudioClip& clip) {
  constexpr Eigen::Index kFrame = 2048, kHop = 512;
  std::map<long, double> counts;
  for (Eigen::Index start = 0; start + kFrame <= clip.samples.size(); start += kHop) {
    const auto f0 = frame_pitch(clip.samples.segment(start, kFrame), clip.sample_rate);
    if (!f0) continue;
    counts[std::lround(69.0 + 12.0 * std::log2(*f0 / 440.0))] += 1.0;
  }
  std::vector<double> c;
  for (const auto& [_, v] : counts) c.push_back(v);
  return entropy_nats(c);
}

// ---------------------------------------------------------------------------
// Timbre

double bark(double hz) {
  return 13.0 * std::atan(0.00076 * hz) + 3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

double plomp_levelt(double f1, double a1, double f2, double a2) {
  constexpr double b1 = 3.5, b2 = 5.75, s1 = 0.0207, s2 = 18.96, dstar = 0.24;
  const double s = dstar / (s1 * std::min(f1, f2) + s2);
  const double df = std::abs(f2 - f1);
  return a1 * a2 * (std::exp(-b1 * s * df) - std::exp(-b2 * s * df));
}

TimbralStats timbral_stats(const AudioClip& clip) {
  // Longer analysis window than the shared front-end so partials a few tens
  // of Hz apart are resolved.
  constexpr int kWindow = 8192, kHop = 4096;
  AudioClip padded = clip;
  if (padded.samples.size() < kWindow) {
    padded.samples.conservativeResize(kWindow);
    padded.samples.tail(kWindow - clip.samples.size()).setZero();
  }
  const Spectrogram spec = stft_magnitude(padded, kWindow, kHop);
  const Eigen::VectorXd mag = spec.values.rowwise().mean();
  const Eigen::VectorXd power = spec.values.array().square().rowwise().mean();

  TimbralStats out;
  if (!(power.sum() > kSilenceEnergy)) return out;

  // Sharpness: weighted centroid over 24 critical bands.
  Eigen::VectorXd band = Eigen::VectorXd::Zero(24);
  for (Eigen::Index k = 1; k < power.size(); ++k) {
    const int z = std::clamp(static_cast<int>(bark(k * spec.freq_bin_hz)), 0, 23);
    band[z] += power[k];
  }
  double num = 0.0;
  for (int z = 0; z < 24; ++z) {
    const double zc = z + 0.5;
    const double g = zc <= 15.0 ? 1.0 : std::exp(0.171 * (zc - 15.0));
    num += band[z] * g * zc;
  }
  out.sharpness = 0.11 * num / band.sum();

  // Roughness: pairwise dissonance over the strongest spectral peaks.
  constexpr int kPeaks = 20;
  constexpr double kPeakFloor = 0.1;  // -20 dB re. the largest peak
  const double top = mag.tail(mag.size() - 1).maxCoeff();
  std::vector<std::pair<double, double>> peaks;  // (amplitude, Hz)
  for (Eigen::Index k = 1; k + 1 < mag.size(); ++k) {
    if (mag[k] <= mag[k - 1] || mag[k] < mag[k + 1] || mag[k] < kPeakFloor * top) continue;
    const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    peaks.emplace_back(b / top, (k + shift) * spec.freq_bin_hz);
  }
  std::sort(peaks.begin(), peaks.end(), std::greater<>());
  if (peaks.size() > kPeaks) peaks.resize(kPeaks);
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    for (std::size_t j = i + 1; j < peaks.size(); ++j) {
      out.roughness += plomp_levelt(peaks[i].second, peaks[i].first, peaks[j].second, peaks[j].first);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// High-level ratings

RatingsIngest parse_high_level(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw SchemaError("ratings file is empty");
  const std::vector<std::string> required{"sound_id",    "Hcu",     "imageability", "imageability_std",
                                          "familiarity", "familiarity_std", "valence", "arousal",
                                          "arousal_std", "location_embedding_density"};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col[rows[0][i]] = i;
  for (const auto& name : required) {
    if (!col.count(name)) throw SchemaError("missing required column: " + name);
  }

  RatingsIngest out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto field = [&](const std::string& name) -> const std::string& {
      static const std::string empty;
      const std::size_t i = col.at(name);
      return i < row.size() ? row[i] : empty;
    };
    const std::string id = field("sound_id");
    if (id.empty()) {
      out.rejected.emplace_back(r, "empty sound_id");
      continue;
    }
    if (!seen.insert(id).second) throw DuplicateKey("duplicate sound_id " + id);

    std::vector<double> v;
    std::string reason;
    for (std::size_t i = 1; i < required.size(); ++i) {
      const auto num = csv::parse_number(field(required[i]));
      if (!num || std::isnan(*num)) {
        reason = "unparseable " + required[i] + ": '" + field(required[i]) + "'";
        break;
      }
      v.push_back(*num);
    }
    if (reason.empty()) {
      if (v[0] < 0.0) reason = "Hcu must be >= 0";
      for (std::size_t i : {2u, 4u, 7u}) {
        if (reason.empty() && v[i] < 0.0) reason = required[i + 1] + " must be >= 0";
      }
    }
    if (!reason.empty()) {
      out.rejected.emplace_back(r, reason);
      continue;
    }
    out.ratings.push_back({id, v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return out;
}

RatingsIngest ingest_high_level(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_high_level(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

// ---------------------------------------------------------------------------
// Table assembly

AudioClip trim_silence(const AudioClip& clip, double floor_db, Eigen::Index min_len) {
  if (clip.samples.size() == 0) return clip;
  const double threshold = clip.samples.cwiseAbs().maxCoeff() * std::pow(10.0, floor_db / 20.0);
  if (!(threshold > 0.0)) return clip;
  Eigen::Index first = 0, last = clip.samples.size() - 1;
  while (std::abs(clip.samples[first]) <= threshold) ++first;
  while (std::abs(clip.samples[last]) <= threshold) --last;
  if (last - first + 1 < min_len) return clip;
  AudioClip out = clip;
  out.samples = clip.samples.segment(first, last - first + 1);
  return out;
}

std::vector<FeatureColumn> feature_columns(const FeatureConfig& cfg) {
  std::vector<FeatureColumn> cols;
  auto low = [&](std::string name) { cols.push_back({std::move(name), FeatureTag::low_level}); };
  low("avg_spectral_spread");
  low("peak_spectral_spread");
  low("avg_spectral_skew");
  low("max_energy");
  for (int b = 1; b <= cfg.flux_bands; ++b) low("avg_flux_band_" + std::to_string(b));
  for (int b = 1; b <= cfg.flux_bands; ++b) low("flux_entropy_band_" + std::to_string(b));
  low("bass_ratio");
  low("mid_ratio");
  low("treble_ratio");
  low("percussive_harmonic_ratio");
  low("pitch_diversity");
  low("timbral_sharpness");
  low("timbral_roughness");
  low("silence_flag");
  for (const auto& name : salience_feature_names()) cols.push_back({name, FeatureTag::salience});
  for (const auto& name : high_level_columns()) cols.push_back({name, FeatureTag::high_level});
  return cols;
}

Eigen::VectorXd extract_clip_features(const AudioClip& input, const FeatureConfig& cfg, SalienceMaps* maps_out) {
  const auto cols = feature_columns(cfg);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(cols.size()), kNaN);
  const AudioClip clip = trim_silence(resample_linear(input, cfg.sample_rate), cfg.floor_db, cfg.window_len);
  const Spectrogram spec = stft_magnitude(clip, cfg.window_len, cfg.hop);

  Eigen::Index i = 0;
  const SpectralStats ss = spectral_stats(spec);
  v[i++] = ss.avg_spectral_spread;
  v[i++] = ss.peak_spectral_spread;
  v[i++] = ss.avg_spectral_skew;
  v[i++] = ss.max_energy;
  const SubbandFlux flux = subband_flux_stats(spec, cfg.flux_bands);
  for (double f : flux.avg_flux) v[i++] = f;
  for (double h : flux.flux_entropy) v[i++] = h;
  const EnergyHpss eh = energy_and_hpss(spec);
  v[i++] = eh.bass_ratio;
  v[i++] = eh.mid_ratio;
  v[i++] = eh.treble_ratio;
  v[i++] = eh.percussive_harmonic_ratio;
  v[i++] = pitch_diversity(clip);
  const TimbralStats ts = timbral_stats(clip);
  v[i++] = ts.sharpness;
  v[i++] = ts.roughness;
  v[i++] = (ss.silent || eh.silent) ? 1.0 : 0.0;

  const SalienceMaps maps = salience_maps(log_compress(spec, cfg.floor_db), cfg.salience);
  for (const auto& [_, value] : salience_summary(maps)) v[i++] = value;
  if (maps_out) *maps_out = maps;
  return v;
}

FeatureTable build_feature_table(const std::vector<AudioClip>& clips,
                                 const std::vector<HighLevelRatings>& ratings, const FeatureConfig& cfg) {
  {
    std::set<std::string> ids;
    for (const auto& c : clips) {
      if (!ids.insert(c.id).second) throw DuplicateKey("duplicate clip id " + c.id);
    }
  }
  const auto cols = feature_columns(cfg);
  const auto n_cols = static_cast<Eigen::Index>(cols.size());
  const auto n_high = static_cast<Eigen::Index>(high_level_columns().size());

  std::vector<Eigen::VectorXd> rows(clips.size());
  std::vector<std::string> errors(clips.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        rows[i] = extract_clip_features(clips[i], cfg);
      } catch (const std::exception& e) {
        rows[i] = Eigen::VectorXd::Constant(n_cols, kNaN);
        errors[i] = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, cfg.threads ? cfg.threads : std::thread::hardware_concurrency());
  const std::size_t chunk = (clips.size() + threads - 1) / std::max<std::size_t>(threads, 1);
  std::vector<std::future<void>> jobs;
  for (std::size_t b = 0; b < clips.size(); b += std::max<std::size_t>(chunk, 1)) {
    jobs.push_back(std::async(std::launch::async, work, b, std::min(clips.size(), b + std::max<std::size_t>(chunk, 1))));
  }
  for (auto& j : jobs) j.get();

  std::map<std::string, const HighLevelRatings*> by_id;
  for (const auto& r : ratings) by_id[r.sound_id] = &r;

  FeatureTable table(cols);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    Eigen::VectorXd& v = rows[i];
    if (const auto it = by_id.find(clips[i].id); it != by_id.end()) {
      const HighLevelRatings& h = *it->second;
      v.tail(n_high) << h.hcu, h.imageability, h.imageability_std, h.familiarity, h.familiarity_std,
          h.valence, h.arousal, h.arousal_std, h.location_embedding_density;
    }
    table.add_row(clips[i].id, v);
    if (!errors[i].empty()) table.row_errors[clips[i].id] = errors[i];
  }
  return table;
}

}  // namespace audmem
