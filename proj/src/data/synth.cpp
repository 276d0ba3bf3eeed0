#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "atkl/data.hpp"
#include "atkl/errors.hpp"
#include "atkl/seed.hpp"

namespace atkl::data {

namespace {

constexpr double kMinToneHz = 100.0;
constexpr double kMaxToneHz = 3500.0;
// Pink noise: white w plus a one-pole lowpass of it,
//   y[n] = kPinkPole * y[n-1] + (1 - kPinkPole) * w[n],  out[n] = w[n] + kPinkGain * y[n].
// The spectrum falls from (1 + kPinkGain)^2 at DC toward the white floor above
// the pole's corner (~65 Hz at 8 kHz), a coarse first-order stand-in for 1/f.
constexpr double kPinkPole = 0.95;
constexpr double kPinkGain = 4.0;

double power(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

// Raised-cosine envelope 0.5 (1 - cos(2 pi r t + phase)), floored so tones
// never fully vanish.
double envelope(double t, double rate, double phase) {
  return 0.2 + 0.8 * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * rate * t + phase));
}

std::vector<double> multi_tone(std::size_t n, double fs, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(2, 4);
  std::uniform_real_distribution<double> freq(kMinToneHz, kMaxToneHz), amp(0.2, 1.0),
      rate(0.5, 4.0), phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> x(n, 0.0);
  const int tones = count(rng);
  for (int k = 0; k < tones; ++k) {
    const double f = freq(rng), a = amp(rng), r = rate(rng), ph = phase(rng), env_ph = phase(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      x[i] += a * envelope(t, r, env_ph) * std::sin(2.0 * std::numbers::pi * f * t + ph);
    }
  }
  return x;
}

// Linear chirp between two random frequencies, smoothed by a one-pole filter.
std::vector<double> tone_sweep(std::size_t n, double fs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(kMinToneHz, kMaxToneHz), rate(0.5, 2.0),
      phase(0.0, 2.0 * std::numbers::pi);
  const double f0 = freq(rng), f1 = freq(rng), r = rate(rng), env_ph = phase(rng);
  const double duration = static_cast<double>(n) / fs;
  std::vector<double> x(n);
  double y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double ph = 2.0 * std::numbers::pi * (f0 * t + 0.5 * (f1 - f0) / duration * t * t);
    y = 0.3 * y + 0.7 * std::sin(ph);
    x[i] = envelope(t, r, env_ph) * y;
  }
  return x;
}

std::vector<double> noise(std::size_t n, NoiseKind kind, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& v : w) v = gauss(rng);
  if (kind == NoiseKind::white) return w;
  double y = 0.0;
  for (auto& v : w) {
    y = kPinkPole * y + (1.0 - kPinkPole) * v;
    v += kPinkGain * y;
  }
  return w;
}

}  // namespace

std::string to_string(CleanKind kind) { return kind == CleanKind::multi_tone ? "multi_tone" : "tone_sweep"; }
std::string to_string(NoiseKind kind) { return kind == NoiseKind::white ? "white" : "pink"; }

CleanKind parse_clean_kind(const std::string& s) {
  if (s == "multi_tone") return CleanKind::multi_tone;
  if (s == "tone_sweep") return CleanKind::tone_sweep;
  throw ConfigError("unknown clean kind '" + s + "'");
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  throw ConfigError("unknown noise kind '" + s + "'");
}

std::size_t MixtureSpec::length() const {
  return static_cast<std::size_t>(std::llround(duration * static_cast<double>(sample_rate)));
}

void MixtureSpec::validate() const {
  if (sample_rate == 0 || !(duration > 0.0) || length() < 2) throw ConfigError("mixture: empty clip");
  if (std::isnan(snr_db) || snr_db == -kNoNoise) throw ConfigError("mixture: snr_db must be finite or +inf");
}

Pair synth_pair(const MixtureSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length();
  const double fs = static_cast<double>(spec.sample_rate);
  std::mt19937_64 clean_rng(derive_seed(spec.seed, "clean"));
  std::mt19937_64 noise_rng(derive_seed(spec.seed, "noise"));
  std::vector<double> clean =
      spec.clean_kind == CleanKind::multi_tone ? multi_tone(n, fs, clean_rng) : tone_sweep(n, fs, clean_rng);
  std::vector<double> noisy = clean;
  if (spec.snr_db != kNoNoise) {
    const std::vector<double> w = noise(n, spec.noise_kind, noise_rng);
    const double gain = std::sqrt(power(clean) / (power(w) * std::pow(10.0, spec.snr_db / 10.0)));
    for (std::size_t i = 0; i < n; ++i) noisy[i] = clean[i] + gain * w[i];
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max({peak, std::abs(clean[i]), std::abs(noisy[i])});
  if (peak > 0.0) {
    const double g = kPeakLevel / peak;
    for (std::size_t i = 0; i < n; ++i) {
      clean[i] *= g;
      noisy[i] *= g;
    }
  }
  return {Tensor({n}, std::move(clean)), Tensor({n}, std::move(noisy))};
}

void DatasetTemplate::validate() const {
  if (clean_kinds.empty() || noise_kinds.empty()) throw ConfigError("dataset: empty kind list");
  if (!(snr_min_db <= snr_max_db) || !std::isfinite(snr_min_db) || !std::isfinite(snr_max_db)) {
    throw ConfigError("dataset: snr range must be finite with min <= max");
  }
  MixtureSpec{sample_rate, duration}.validate();
}

std::size_t validation_count(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / 10.0)));
}

Clip make_clip(std::size_t index, std::size_t n, std::uint64_t base_seed, const DatasetTemplate& tmpl) {
  if (index >= n) throw UsageError("make_clip: index out of range");
  Clip clip;
  clip.index = index;
  clip.seed = base_seed + index;
  clip.validation = index >= n - validation_count(n);
  std::mt19937_64 rng(derive_seed(clip.seed, "mixture"));
  std::uniform_real_distribution<double> snr(tmpl.snr_min_db, tmpl.snr_max_db);
  clip.snr_db = tmpl.snr_min_db == tmpl.snr_max_db ? tmpl.snr_min_db : snr(rng);
  std::uniform_int_distribution<std::size_t> pick_clean(0, tmpl.clean_kinds.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_noise(0, tmpl.noise_kinds.size() - 1);
  MixtureSpec spec{tmpl.sample_rate, tmpl.duration, clip.snr_db, tmpl.clean_kinds[pick_clean(rng)],
                   tmpl.noise_kinds[pick_noise(rng)], clip.seed};
  Pair pair = synth_pair(spec);
  clip.clean = pair.clean;
  clip.noisy = pair.noisy;
  return clip;
}

Dataset make_dataset(std::size_t n, std::uint64_t base_seed, const DatasetTemplate& tmpl) {
  if (n < 2) throw ConfigError("dataset: need at least 2 clips");
  tmpl.validate();
  Dataset ds;
  ds.sample_rate = tmpl.sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    Clip clip = make_clip(i, n, base_seed, tmpl);
    (clip.validation ? ds.val : ds.train).push_back(std::move(clip));
  }
  return ds;
}

}  // namespace atkl::data
