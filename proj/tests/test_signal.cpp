#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "atkl/gradcheck.hpp"
#include "atkl/signal.hpp"
#include "support/helpers.hpp"

using namespace atkl;
using atkl::testing::random_tensor;

namespace {

double interior_relative_error(const Tensor& x, const Tensor& y, std::size_t win) {
  // Samples covered by every overlapping frame position.
  double err = 0.0, ref = 0.0;
  for (std::size_t n = win; n + win < x.numel(); ++n) {
    err += (x[n] - y[n]) * (x[n] - y[n]);
    ref += x[n] * x[n];
  }
  return std::sqrt(err / ref);
}

}  // namespace

TEST_CASE("hann window") {
  Tensor w = hann(256);
  CHECK(w[0] == 0.0);
  CHECK(w[128] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(hann(1), ConfigError);

  // Direct summation of shifted windows over interior samples.
  auto overlap_sum_spread = [&](std::size_t hop, bool squared) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t n = 0; n < hop; ++n) {
      double s = 0.0;
      for (std::size_t m = n; m < 256; m += hop) s += squared ? w[m] * w[m] : w[m];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return hi - lo;
  };
  CHECK(overlap_sum_spread(128, false) < 1e-10);
  CHECK(overlap_sum_spread(64, true) < 1e-10);
  // The squared window is not constant-overlap-add at 50% overlap, which is
  // why synthesis normalizes by the accumulated window sum.
  CHECK(overlap_sum_spread(128, true) > 0.1);
}

TEST_CASE("stft shapes and frame count") {
  StftConfig cfg{8000, 256, 80, 256};
  Tensor wave({8000}, 0.0);
  Spectrogram s = stft(wave, cfg);
  CHECK(s.bins() == 129);
  CHECK(s.frames() == 97);
  for (double v : s.real.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(stft(Tensor({100}, 0.0), cfg), InputTooShortError);
  CHECK(StftConfig::make(16000, 400, 160).fft_size == 512);
  CHECK_THROWS_AS((StftConfig{8000, 256, 300, 256}.validate()), ConfigError);
  CHECK_THROWS_AS((StftConfig{8000, 256, 128, 200}.validate()), ConfigError);
}

TEST_CASE("pure cosine at an exact bin peaks at that bin") {
  StftConfig cfg{8000, 256, 128, 256};
  for (std::size_t k : {5u, 17u, 64u}) {
    std::vector<double> v(2048);
    for (std::size_t n = 0; n < v.size(); ++n) {
      v[n] = std::cos(2.0 * std::numbers::pi * static_cast<double>(k * n) / 256.0);
    }
    Spectrogram s = stft(Tensor({v.size()}, v), cfg);
    for (std::size_t t = 0; t < s.frames(); ++t) {
      std::size_t best = 0;
      double best_mag = -1.0;
      for (std::size_t f = 0; f < s.bins(); ++f) {
        const double re = s.real[f * s.frames() + t], im = s.imag[f * s.frames() + t];
        if (re * re + im * im > best_mag) {
          best_mag = re * re + im * im;
          best = f;
        }
      }
      CHECK(best == k);
    }
  }
}

TEST_CASE("istft inverts stft over the interior") {
  std::mt19937_64 rng(21);
  for (std::size_t hop : {128u, 64u}) {
    StftConfig cfg{8000, 256, hop, 256};
    Tensor x = random_tensor({4000}, rng);
    Tensor y = istft(stft(x, cfg), cfg, x.numel());
    CHECK(y.numel() == x.numel());
    CHECK(interior_relative_error(x, y, 256) < 1e-6);
  }
  // Non power-of-two ratio with zero-padded FFT.
  StftConfig odd{8000, 200, 80, 256};
  Tensor x = random_tensor({3000}, rng);
  CHECK(interior_relative_error(x, istft(stft(x, odd), odd, x.numel()), 200) < 1e-6);
}

TEST_CASE("istft linearity and zero input") {
  std::mt19937_64 rng(22);
  StftConfig cfg{8000, 256, 80, 256};
  Spectrogram z{Tensor({129, 10}, 0.0), Tensor({129, 10}, 0.0), cfg};
  Tensor out = istft(z, cfg, 1000);
  for (double v : out.values()) CHECK(v == 0.0);

  Spectrogram s{random_tensor({129, 10}, rng), random_tensor({129, 10}, rng), cfg};
  Spectrogram s3{scale(s.real, 3.0), scale(s.imag, 3.0), cfg};
  Tensor a = istft(s, cfg, 1000), b = istft(s3, cfg, 1000);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(b[i] == doctest::Approx(3.0 * a[i]).epsilon(1e-12));
  CHECK_THROWS_AS(istft(Spectrogram{Tensor({100, 10}, 0.0), Tensor({100, 10}, 0.0), cfg}, cfg, 1000),
                  ShapeError);
}

TEST_CASE("stft is linear") {
  std::mt19937_64 rng(23);
  StftConfig cfg{8000, 256, 80, 256};
  Tensor x = random_tensor({2000}, rng), y = random_tensor({2000}, rng);
  Spectrogram sx = stft(x, cfg), sy = stft(y, cfg);
  Spectrogram sc = stft(add(scale(x, 2.5), scale(y, -0.75)), cfg);
  for (std::size_t i = 0; i < sc.real.numel(); ++i) {
    CHECK(std::abs(sc.real[i] - (2.5 * sx.real[i] - 0.75 * sy.real[i])) < 1e-9);
    CHECK(std::abs(sc.imag[i] - (2.5 * sx.imag[i] - 0.75 * sy.imag[i])) < 1e-9);
  }
}

TEST_CASE("power spectrum gradient passes grad_check") {
  std::mt19937_64 rng(24);
  StftConfig cfg{8000, 32, 8, 32};
  auto report = grad_check(
      [cfg](const std::vector<Tensor>& in) {
        Spectrogram s = stft(in[0], cfg);
        return add(sum(square(s.real)), sum(square(s.imag)));
      },
      {random_tensor({96}, rng)});
  CHECK(report.passed(1e-4));
}

TEST_CASE("teacher and student hops give the expected frame counts") {
  StftConfig teacher{8000, 256, 128, 256}, student{8000, 256, 80, 256};
  require_compatible(teacher, student);
  CHECK(teacher.frames(8000) == 1 + (8000 - 256) / 128);
  CHECK(student.frames(8000) == 1 + (8000 - 256) / 80);
  CHECK(student.frames(8000) > teacher.frames(8000));
  CHECK_THROWS_AS(require_compatible(teacher, StftConfig{8000, 200, 80, 256}), ConfigError);
}
