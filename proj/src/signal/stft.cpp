#include <algorithm>
#include <cmath>
#include <numbers>

#include "atkl/signal.hpp"

namespace atkl {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

StftConfig StftConfig::make(std::size_t sample_rate, std::size_t win_len, std::size_t hop_len) {
  return {sample_rate, win_len, hop_len, next_pow2(win_len)};
}

std::size_t StftConfig::frames(std::size_t length) const {
  if (length < win_len) {
    throw InputTooShortError("stft: " + std::to_string(length) + " samples shorter than window " +
                             std::to_string(win_len));
  }
  return 1 + (length - win_len) / hop_len;
}

void StftConfig::validate() const {
  if (win_len < 2) throw ConfigError("stft: win_len must be at least 2");
  if (hop_len == 0 || hop_len > win_len) throw ConfigError("stft: hop_len must be in [1, win_len]");
  if (fft_size < win_len || (fft_size & (fft_size - 1)) != 0) {
    throw ConfigError("stft: fft_size must be a power of two >= win_len");
  }
  if (sample_rate == 0) throw ConfigError("stft: sample_rate must be positive");
}

void require_compatible(const StftConfig& a, const StftConfig& b) {
  if (a.win_len != b.win_len || a.fft_size != b.fft_size || a.sample_rate != b.sample_rate) {
    throw ConfigError("stft: teacher and student must share sample rate, window and FFT size");
  }
}

Tensor hann(std::size_t win_len) {
  if (win_len < 2) throw ConfigError("hann: win_len must be at least 2");
  std::vector<double> w(win_len);
  for (std::size_t n = 0; n < win_len; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(win_len));
  }
  return Tensor({win_len}, std::move(w));
}

StftKernel::StftKernel(const StftConfig& config) : config_(config) {
  config_.validate();
  const std::size_t win = config_.win_len, n_fft = config_.fft_size, bins = config_.bins();
  const Tensor window = hann(win);
  auto w = window.values();
  // Angles reduced modulo n_fft before scaling keeps the tables accurate.
  auto angle = [n_fft](std::size_t n, std::size_t k) {
    return 2.0 * std::numbers::pi * static_cast<double>((n * k) % n_fft) / static_cast<double>(n_fft);
  };
  std::vector<double> ac(win * bins), as(win * bins), sr(bins * win), si(bins * win);
  for (std::size_t n = 0; n < win; ++n) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double a = angle(n, k);
      ac[n * bins + k] = w[n] * std::cos(a);
      as[n * bins + k] = -w[n] * std::sin(a);
      // Onesided inverse: interior bins count twice, DC and Nyquist once.
      const double weight = (k == 0 || 2 * k == n_fft) ? 1.0 : 2.0;
      const double c = weight / static_cast<double>(n_fft) * w[n];
      sr[k * win + n] = c * std::cos(a);
      si[k * win + n] = -c * std::sin(a);
    }
  }
  analysis_cos_ = Tensor({win, bins}, std::move(ac));
  analysis_sin_ = Tensor({win, bins}, std::move(as));
  synthesis_re_ = Tensor({bins, win}, std::move(sr));
  synthesis_im_ = Tensor({bins, win}, std::move(si));
}

Spectrogram StftKernel::analyze(const Tensor& wave) const {
  if (wave.rank() != 1) throw ShapeError("stft: expected a 1-D waveform, got " + shape_str(wave.shape()));
  (void)config_.frames(wave.dim(0));
  Tensor frames = frame(wave, config_.win_len, config_.hop_len);
  return {transpose(matmul(frames, analysis_cos_)), transpose(matmul(frames, analysis_sin_)), config_};
}

Tensor StftKernel::synthesize(const Spectrogram& spec, std::size_t out_len) const {
  if (spec.real.rank() != 2 || spec.real.shape() != spec.imag.shape() ||
      spec.real.dim(0) != config_.bins()) {
    throw ShapeError("istft: spectrogram " + shape_str(spec.real.shape()) + "/" +
                     shape_str(spec.imag.shape()) + " incompatible with " +
                     std::to_string(config_.bins()) + " bins");
  }
  const std::size_t frames = spec.frames();
  const std::size_t win = config_.win_len, hop = config_.hop_len;
  const std::size_t span = (frames - 1) * hop + win;

  Tensor time_frames = add(matmul(transpose(spec.real), synthesis_re_),
                           matmul(transpose(spec.imag), synthesis_im_));
  Tensor signal = overlap_add(time_frames, hop, span);

  const Tensor window = hann(win);
  std::vector<double> inv_norm(span, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < win; ++n) inv_norm[t * hop + n] += window[n] * window[n];
  }
  for (auto& v : inv_norm) v = 1.0 / std::max(v, kWindowSumFloor);
  signal = mul(signal, Tensor({span}, std::move(inv_norm)));

  if (span == out_len) return signal;
  if (span > out_len) return slice(signal, 0, 0, out_len);
  return concat({signal, Tensor({out_len - span}, 0.0)}, 0);
}

Spectrogram stft(const Tensor& wave, const StftConfig& config) {
  return StftKernel(config).analyze(wave);
}

Tensor istft(const Spectrogram& spec, const StftConfig& config, std::size_t out_len) {
  return StftKernel(config).synthesize(spec, out_len);
}

}  // namespace atkl
