#pragma once

#include "audmem/audio.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>

namespace signals {

using audmem::AudioClip;

inline constexpr int kRate = 44100;

inline AudioClip make_clip(double seconds, const std::function<double(double)>& f, std::string id = "c") {
  AudioClip c;
  c.id = std::move(id);
  c.sample_rate = kRate;
  c.samples.resize(static_cast<Eigen::Index>(seconds * kRate));
  for (Eigen::Index i = 0; i < c.samples.size(); ++i) c.samples[i] = f(static_cast<double>(i) / kRate);
  return c;
}

inline AudioClip tone(double hz, double seconds = 1.0, double amp = 0.5) {
  return make_clip(seconds, [=](double t) { return amp * std::sin(2 * std::numbers::pi * hz * t); });
}

inline AudioClip noise(double seconds, std::uint64_t seed, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  return make_clip(seconds, [&](double) { return u(rng); });
}

inline AudioClip silence(double seconds) {
  return make_clip(seconds, [](double) { return 0.0; });
}

}  // namespace signals
