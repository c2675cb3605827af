#include "audmem/audio.hpp"

#include "audmem/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

namespace audmem {

namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

AudioClip decode_audio(std::span<const std::uint8_t> bytes, std::string id) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DecodeError("missing RIFF/WAVE header");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes, off + 4);
    const std::size_t body = off + 8;
    if (body + size > bytes.size()) {
      // Truncated final data chunks are common in the wild; accept what is there.
      if (std::memcmp(bytes.data() + off, "data", 4) != 0) {
        throw DecodeError("chunk extends past end of file");
      }
    }
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(bytes.data() + off, "fmt ", 4) == 0) {
      if (avail < 16) throw DecodeError("fmt chunk too short");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (avail < 26) throw DecodeError("extensible fmt chunk too short");
        format = read_u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + off, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    off = body + size + (size & 1u);
  }

  if (!have_fmt) throw DecodeError("no fmt chunk");
  if (!have_data) throw DecodeError("no data chunk");
  if (rate == 0) throw DecodeError("sample rate is zero");
  if (channels < 1 || channels > 2) {
    throw UnsupportedFormat("unsupported channel count " + std::to_string(channels));
  }
  const bool pcm = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool flt = format == kFormatFloat && bits == 32;
  if (!pcm && !flt) {
    throw UnsupportedFormat("unsupported codec format=" + std::to_string(format) +
                            " bits=" + std::to_string(bits));
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n = data.size() / frame_bytes;
  if (n == 0) throw DecodeError("empty data chunk");

  AudioClip clip;
  clip.id = std::move(id);
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(static_cast<Eigen::Index>(n));

  auto sample_at = [&](std::size_t pos) -> double {
    const std::uint8_t* p = data.data() + pos;
    if (flt) {
      float f;
      std::memcpy(&f, p, 4);
      return std::clamp(static_cast<double>(f), -1.0, 1.0);
    }
    if (bits == 16) {
      const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
      return v / 32768.0;
    }
    std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
    if (v & 0x800000) v |= ~0xFFFFFF;
    return v / 8388608.0;
  };

  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += sample_at(i * frame_bytes + c * bytes_per_sample);
    clip.samples[static_cast<Eigen::Index>(i)] = acc / channels;
  }
  return clip;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DecodeError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AudioClip load_audio(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_audio(bytes, path.stem().string());
}

std::vector<std::uint8_t> encode_wav16(const AudioClip& clip) {
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
    const double s = std::clamp(clip.samples[i], -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(std::clamp(s * 32768.0, -32768.0, 32767.0)));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

AudioClip resample_linear(const AudioClip& clip, int target_rate) {
  if (clip.sample_rate == target_rate) return clip;
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
  const auto n_in = clip.samples.size();
  const auto n_out = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor((n_in - 1) / ratio)) + 1);
  AudioClip out{clip.id, target_rate, Eigen::VectorXd(n_out)};
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const double pos = i * ratio;
    const auto i0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), n_in - 1);
    const auto i1 = std::min<Eigen::Index>(i0 + 1, n_in - 1);
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = (1.0 - frac) * clip.samples[i0] + frac * clip.samples[i1];
  }
  return out;
}

Eigen::VectorXd hann_window(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

Spectrogram stft_magnitude(const AudioClip& clip, int window_len, int hop) {
  if (window_len <= 0 || !std::has_single_bit(static_cast<unsigned>(window_len))) {
    throw ConfigError("window_len must be a power of two");
  }
  if (hop <= 0 || hop > window_len) throw ConfigError("hop must be in (0, window_len]");
  if (clip.samples.size() < window_len) {
    throw InsufficientAudio("clip has " + std::to_string(clip.samples.size()) +
                            " samples, window needs " + std::to_string(window_len));
  }

  const Eigen::Index frames = (clip.samples.size() - window_len) / hop + 1;
  const Eigen::Index bins = window_len / 2 + 1;
  const Eigen::VectorXd window = hann_window(window_len);

  Spectrogram spec;
  spec.values.resize(bins, frames);
  spec.freq_bin_hz = static_cast<double>(clip.sample_rate) / window_len;
  spec.frame_hop_s = static_cast<double>(hop) / clip.sample_rate;
  spec.window_len = window_len;
  spec.sample_rate = clip.sample_rate;

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(window_len));
  std::vector<std::complex<double>> out;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int i = 0; i < window_len; ++i) frame[i] = clip.samples[t * hop + i] * window[i];
    fft.fwd(out, frame);
    for (Eigen::Index k = 0; k < bins; ++k) spec.values(k, t) = std::abs(out[static_cast<std::size_t>(k)]);
  }
  return spec;
}

Spectrogram log_compress(const Spectrogram& spec, double floor_db) {
  Spectrogram out = spec;
  out.values = spec.values.unaryExpr([floor_db](double v) {
    return std::max(20.0 * std::log10(std::max(v, kLogEpsilon)), floor_db);
  });
  const double lo = out.values.minCoeff();
  const double hi = out.values.maxCoeff();
  if (hi - lo > 0.0) {
    out.values = (out.values.array() - lo) / (hi - lo);
  } else {
    out.values.setZero();
  }
  out.log_compressed = true;
  return out;
}

std::vector<std::uint8_t> encode_spg(const Eigen::MatrixXd& m) {
  std::vector<std::uint8_t> out{'S', 'P', 'G', '1'};
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
  return out;
}

Eigen::MatrixXf decode_spg(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "SPG1", 4) != 0) {
    throw DecodeError("not an SPG1 file");
  }
  const std::uint32_t rows = read_u32(bytes, 4);
  const std::uint32_t cols = read_u32(bytes, 8);
  if (bytes.size() != 16 + 4ull * rows * cols) throw DecodeError("SPG1 size mismatch");
  Eigen::MatrixXf m(rows, cols);
  std::size_t off = 16;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c, off += 4) {
      m(r, c) = std::bit_cast<float>(read_u32(bytes, off));
    }
  }
  return m;
}

}  // namespace audmem
