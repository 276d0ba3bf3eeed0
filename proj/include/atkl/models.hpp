#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atkl/nn.hpp"
#include "atkl/signal.hpp"

namespace atkl {

/// Complex U-Net with an LSTM bottleneck.
///
/// enc_channels counts channel-stacked features (real and imaginary halves),
/// so every entry must be even; layer k has enc_channels[k] / 2 complex
/// channels. An empty list describes a model with no layers at all.
struct ModelConfig {
  StftConfig stft;
  std::vector<std::size_t> enc_channels;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;

  // Frequency x time kernel; frequency stride 2, time stride 1.
  static constexpr std::size_t kKernelFreq = 5;
  static constexpr std::size_t kKernelTime = 2;

  static ModelConfig student_desk();
  static ModelConfig teacher_desk();
  static ModelConfig student_full();
  static ModelConfig teacher_full();
  static ModelConfig dccrn_full();
  /// Two-layer models small enough for finite differences (9 bins -> 5 -> 3).
  /// The teacher doubles the second layer and the hop.
  static ModelConfig tiny_student();
  static ModelConfig tiny_teacher();

  /// Frequency extents entering each encoder layer plus the bottleneck
  /// extent: bins, then (F - 1) / 2 + 1 per layer.
  std::vector<std::size_t> freq_extents() const;
  void validate() const;

  /// Stacked channel and frequency extents of every tap: encoder layers in
  /// order, then decoder layers in order.
  std::vector<std::size_t> tap_channels() const;
  std::vector<std::size_t> tap_freqs() const;

  bool operator==(const ModelConfig&) const = default;
};

struct TappedForward {
  Tensor enhanced;                // (L)
  std::vector<Tensor> enc_taps;   // per encoder layer, (C_k, F_k, T) post-activation
  std::vector<Tensor> dec_taps;   // per decoder layer, block output
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const StftKernel& stft() const { return stft_; }

  TappedForward forward_tapped(const Tensor& noisy) const;
  Tensor enhance(const Tensor& noisy) const { return forward_tapped(noisy).enhanced; }

  /// Named handles aliasing the model's parameters, in a fixed order.
  const nn::ParameterList& parameters() const { return params_; }
  std::size_t num_parameters() const;
  void set_trainable(bool trainable);

 private:
  ModelConfig config_;
  StftKernel stft_;
  std::vector<nn::ConvBlock> encoder_;
  nn::LstmStack lstm_;
  nn::Linear projection_;
  std::vector<nn::ConvBlock> decoder_;
  nn::ComplexConv2d mask_;
  nn::ParameterList params_;
};

Model build_model(const ModelConfig& config, std::uint64_t seed);

/// Scalar parameter count of the instantiated model; 0 for an empty config.
std::size_t count_params(const ModelConfig& config);

// Checkpoints: little-endian "ATKL", u32 version, u32 count, then per tensor
// u32 name length + name, u32 rank, u32 extents, f32 row-major values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

/// Stores the parameters plus "meta.stft" and "meta.model" records from which
/// load_checkpoint rebuilds the configuration.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace atkl
