#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace audmem {

/// Mono audio, amplitudes in [-1, 1].
struct AudioClip {
  std::string id;
  int sample_rate = 44100;
  Eigen::VectorXd samples;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Magnitude spectrogram: rows are frequency bins (window_len / 2 + 1),
/// columns are frames.
struct Spectrogram {
  Eigen::MatrixXd values;
  double freq_bin_hz = 0.0;
  double frame_hop_s = 0.0;
  int window_len = 0;
  int sample_rate = 0;
  bool log_compressed = false;

  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

inline constexpr int kDefaultSampleRate = 44100;
inline constexpr int kDefaultWindow = 1024;
inline constexpr int kDefaultHop = 512;
inline constexpr double kLogEpsilon = 1e-10;
inline constexpr double kDefaultFloorDb = -80.0;

/// Parses a RIFF/WAVE file (PCM16, PCM24, float32; mono or stereo).
/// Stereo is averaged to mono. Throws DecodeError or UnsupportedFormat.
AudioClip decode_audio(std::span<const std::uint8_t> bytes, std::string id = {});
AudioClip load_audio(const std::filesystem::path& path);

/// 16-bit PCM mono WAV encoder. Samples are clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav16(const AudioClip& clip);

/// Linear-interpolation resampling. Returns the input unchanged when the
/// rate already matches.
AudioClip resample_linear(const AudioClip& clip, int target_rate);

/// Periodic Hann window of length n.
Eigen::VectorXd hann_window(int n);

/// |STFT| with a Hann window and no padding: frame t covers
/// samples [t * hop, t * hop + window_len).
Spectrogram stft_magnitude(const AudioClip& clip, int window_len = kDefaultWindow,
                           int hop = kDefaultHop);

/// dB conversion with a floor, then min-max rescale to [0, 1]. A constant
/// input maps to all zeros.
Spectrogram log_compress(const Spectrogram& spec, double floor_db = kDefaultFloorDb);

/// "SPG1" binary dump: 4-byte magic, u32 rows, u32 cols, u32 reserved (0),
/// then rows * cols little-endian f32 in row-major order.
std::vector<std::uint8_t> encode_spg(const Eigen::MatrixXd& m);
Eigen::MatrixXf decode_spg(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace audmem
