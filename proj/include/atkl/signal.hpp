#pragma once

#include <cstddef>

#include "atkl/tensor.hpp"

namespace atkl {

struct StftConfig {
  std::size_t sample_rate = 8000;
  std::size_t win_len = 256;
  std::size_t hop_len = 128;
  std::size_t fft_size = 256;

  /// fft_size becomes the next power of two >= win_len.
  static StftConfig make(std::size_t sample_rate, std::size_t win_len, std::size_t hop_len);

  std::size_t bins() const { return fft_size / 2 + 1; }
  /// Causal framing without center padding: 1 + (length - win_len) / hop_len.
  std::size_t frames(std::size_t length) const;
  void validate() const;

  bool operator==(const StftConfig&) const = default;
};

/// Teacher and student analyses must agree on frequency extent.
void require_compatible(const StftConfig& a, const StftConfig& b);

std::size_t next_pow2(std::size_t n);

struct Spectrogram {
  Tensor real;  // (F, T)
  Tensor imag;  // (F, T)
  StftConfig config;

  std::size_t bins() const { return real.dim(0); }
  std::size_t frames() const { return real.dim(1); }
};

/// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / win_len).
Tensor hann(std::size_t win_len);

/// Below this the overlap-added squared-window sum is clamped before
/// normalization; only the first and last partial frames are affected.
inline constexpr double kWindowSumFloor = 1e-2;

/// Differentiable STFT pair realized with fixed DFT matrices. The matrices are
/// built once per configuration.
class StftKernel {
 public:
  explicit StftKernel(const StftConfig& config);

  const StftConfig& config() const { return config_; }
  Spectrogram analyze(const Tensor& wave) const;
  /// Overlap-add synthesis with a Hann window and squared-window-sum
  /// normalization, truncated or zero-padded to `out_len`.
  Tensor synthesize(const Spectrogram& spec, std::size_t out_len) const;

 private:
  StftConfig config_;
  Tensor analysis_cos_;   // (win, F)
  Tensor analysis_sin_;   // (win, F), negated
  Tensor synthesis_re_;   // (F, win)
  Tensor synthesis_im_;   // (F, win)
};

Spectrogram stft(const Tensor& wave, const StftConfig& config);
Tensor istft(const Spectrogram& spec, const StftConfig& config, std::size_t out_len);

}  // namespace atkl
