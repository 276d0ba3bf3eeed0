#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "atkl/tensor.hpp"

namespace atkl::data {

enum class CleanKind { multi_tone, tone_sweep };
enum class NoiseKind { white, pink };

std::string to_string(CleanKind kind);
std::string to_string(NoiseKind kind);
CleanKind parse_clean_kind(const std::string& s);
NoiseKind parse_noise_kind(const std::string& s);

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();
inline constexpr double kPeakLevel = 0.9;

struct MixtureSpec {
  std::size_t sample_rate = 8000;
  double duration = 1.0;  // seconds
  double snr_db = 0.0;    // kNoNoise for a clean copy
  CleanKind clean_kind = CleanKind::multi_tone;
  NoiseKind noise_kind = NoiseKind::white;
  std::uint64_t seed = 0;

  std::size_t length() const;
  void validate() const;
};

struct Pair {
  Tensor clean;
  Tensor noisy;
};

/// Deterministic clean/noisy pair. The noise is scaled so the clean-to-noise
/// power ratio equals snr_db, then both signals share one gain that puts the
/// larger peak at kPeakLevel.
Pair synth_pair(const MixtureSpec& spec);

/// Per-clip variation for make_dataset. Each clip draws its SNR uniformly from
/// [snr_min_db, snr_max_db] and its kinds from the listed options.
struct DatasetTemplate {
  std::size_t sample_rate = 8000;
  double duration = 1.0;
  double snr_min_db = -5.0;
  double snr_max_db = 5.0;
  std::vector<CleanKind> clean_kinds{CleanKind::multi_tone, CleanKind::tone_sweep};
  std::vector<NoiseKind> noise_kinds{NoiseKind::white, NoiseKind::pink};

  void validate() const;
  bool operator==(const DatasetTemplate&) const = default;
};

struct Clip {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  bool validation = false;
  Tensor clean;
  Tensor noisy;
};

struct Dataset {
  std::vector<Clip> train;
  std::vector<Clip> val;
  std::size_t sample_rate = 0;
};

/// Number of validation clips for n clips: round(n / 10), at least one.
std::size_t validation_count(std::size_t n);

/// Clip `index` of an n-clip dataset, seeded base_seed + index. Equal to the
/// same clip taken from make_dataset.
Clip make_clip(std::size_t index, std::size_t n, std::uint64_t base_seed, const DatasetTemplate& tmpl);

/// Seeds base_seed..base_seed+n-1; the last validation_count(n) indices form
/// the validation split.
Dataset make_dataset(std::size_t n, std::uint64_t base_seed, const DatasetTemplate& tmpl);

// PCM16 mono WAV.
struct Wav {
  Tensor samples;
  std::size_t sample_rate = 0;
};
Wav load_wav(const std::filesystem::path& path);
void save_wav(const std::filesystem::path& path, const Tensor& samples, std::size_t sample_rate);

/// Writes clean_NNNN.wav / noisy_NNNN.wav for every clip plus manifest.csv
/// (`index,seed,snr_db,split`).
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset, std::size_t sample_rate);
Dataset read_dataset(const std::filesystem::path& dir);

std::string manifest_csv(const Dataset& dataset);

}  // namespace atkl::data
