#include <string>

#include "atkl/errors.hpp"
#include "atkl/models.hpp"

namespace atkl {

namespace {

constexpr Conv2dGeometry kEncoderGeometry{2, 1, 2, 2, 1, 0};
// Transposed: frequency pads crop 2 + 2; the one extra trailing frame is
// cropped so frame t only sees bottleneck frames <= t.
constexpr Conv2dGeometry kDecoderGeometry{2, 1, 2, 2, 0, 1};
constexpr Conv2dGeometry kPointwise{1, 1, 0, 0, 0, 0};

}  // namespace

ModelConfig ModelConfig::student_desk() {
  return {StftConfig{8000, 256, 80, 256}, {8, 16, 16, 32}, 16, 2};
}

ModelConfig ModelConfig::teacher_desk() {
  return {StftConfig{8000, 256, 128, 256}, {8, 16, 32, 64}, 32, 2};
}

ModelConfig ModelConfig::student_full() {
  return {StftConfig::make(16000, 400, 100), {16, 32, 64, 64, 128, 256}, 64, 2};
}

ModelConfig ModelConfig::teacher_full() {
  return {StftConfig::make(16000, 400, 160), {16, 32, 64, 128, 256, 256}, 256, 2};
}

ModelConfig ModelConfig::dccrn_full() {
  return {StftConfig::make(16000, 400, 100), {16, 32, 64, 128, 256, 256}, 256, 2};
}

ModelConfig ModelConfig::tiny_student() { return {StftConfig{8000, 16, 4, 16}, {4, 4}, 3, 1}; }

ModelConfig ModelConfig::tiny_teacher() { return {StftConfig{8000, 16, 8, 16}, {4, 8}, 4, 1}; }

std::vector<std::size_t> ModelConfig::freq_extents() const {
  std::vector<std::size_t> f{stft.bins()};
  for (std::size_t k = 0; k < enc_channels.size(); ++k) f.push_back((f.back() - 1) / 2 + 1);
  return f;
}

void ModelConfig::validate() const {
  stft.validate();
  if (enc_channels.empty()) throw ConfigError("model: enc_channels must not be empty");
  for (std::size_t c : enc_channels) {
    if (c == 0 || c % 2 != 0) {
      throw ConfigError("model: enc_channels entries must be positive and even, got " +
                        std::to_string(c));
    }
  }
  const auto f = freq_extents();
  for (std::size_t k = 0; k < enc_channels.size(); ++k) {
    // The transposed conv maps F to 2F - 1, so only odd extents are restored.
    if (f[k] % 2 == 0) {
      throw ConfigError("model: frequency extent " + std::to_string(f[k]) + " entering encoder layer " +
                        std::to_string(k) + " is even; the decoder cannot restore it");
    }
  }
  if (lstm_layers > 0 && lstm_hidden == 0) throw ConfigError("model: lstm_hidden must be positive");
}

std::vector<std::size_t> ModelConfig::tap_channels() const {
  std::vector<std::size_t> out(enc_channels);
  const std::size_t layers = enc_channels.size();
  for (std::size_t j = 0; j < layers; ++j) {
    out.push_back(j + 1 < layers ? enc_channels[layers - 2 - j] : enc_channels[0]);
  }
  return out;
}

std::vector<std::size_t> ModelConfig::tap_freqs() const {
  const auto f = freq_extents();
  const std::size_t layers = enc_channels.size();
  std::vector<std::size_t> out(f.begin() + 1, f.end());
  for (std::size_t j = 0; j < layers; ++j) out.push_back(f[layers - 1 - j]);
  return out;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config), stft_(config.stft) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto& ch = config_.enc_channels;
  const std::size_t layers = ch.size();
  const std::size_t kf = ModelConfig::kKernelFreq, kt = ModelConfig::kKernelTime;

  std::size_t in = 1;
  for (std::size_t k = 0; k < layers; ++k) {
    encoder_.emplace_back(in, ch[k] / 2, kf, kt, kEncoderGeometry, false, rng);
    in = ch[k] / 2;
  }
  const std::size_t features = ch.back() * config_.freq_extents().back();
  if (config_.lstm_layers > 0) {
    lstm_ = nn::LstmStack(features, config_.lstm_hidden, config_.lstm_layers, rng);
    projection_ = nn::Linear(config_.lstm_hidden, features, rng);
  }
  std::size_t prev = ch.back() / 2;
  for (std::size_t j = 0; j < layers; ++j) {
    const std::size_t skip = ch[layers - 1 - j] / 2;
    const std::size_t out = config_.tap_channels()[layers + j] / 2;
    decoder_.emplace_back(prev + skip, out, kf, kt, kDecoderGeometry, true, rng);
    prev = out;
  }
  mask_ = nn::ComplexConv2d(prev, 1, 1, 1, kPointwise, false, rng);

  for (std::size_t k = 0; k < layers; ++k) encoder_[k].collect("enc." + std::to_string(k), params_);
  if (config_.lstm_layers > 0) {
    lstm_.collect("lstm", params_);
    projection_.collect("proj", params_);
  }
  for (std::size_t j = 0; j < layers; ++j) decoder_[j].collect("dec." + std::to_string(j), params_);
  mask_.collect("mask", params_);
}

TappedForward Model::forward_tapped(const Tensor& noisy) const {
  if (noisy.rank() != 1) throw ShapeError("model: expected a 1-D waveform, got " + shape_str(noisy.shape()));
  const Spectrogram spec = stft_.analyze(noisy);
  const std::size_t bins = spec.bins(), frames = spec.frames();

  TappedForward out;
  Tensor x = concat({reshape(spec.real, {1, bins, frames}), reshape(spec.imag, {1, bins, frames})}, 0);
  for (const auto& block : encoder_) {
    x = block.forward(x);
    out.enc_taps.push_back(x);
  }

  if (config_.lstm_layers > 0) {
    const Shape shape = x.shape();
    const std::size_t features = shape[0] * shape[1];
    Tensor seq = transpose(reshape(x, {features, frames}));  // (T, C*F)
    seq = projection_.forward(lstm_.forward(seq));
    x = reshape(transpose(seq), shape);
  }

  const std::size_t layers = decoder_.size();
  for (std::size_t j = 0; j < layers; ++j) {
    x = decoder_[j].forward(nn::complex_concat(x, out.enc_taps[layers - 1 - j]));
    out.dec_taps.push_back(x);
  }

  const Tensor mask = mask_.forward(x);  // (2, F, T)
  const Spectrogram enhanced = nn::apply_mask(spec, reshape(slice(mask, 0, 0, 1), {bins, frames}),
                                              reshape(slice(mask, 0, 1, 2), {bins, frames}));
  out.enhanced = stft_.synthesize(enhanced, noisy.numel());
  return out;
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void Model::set_trainable(bool trainable) {
  for (auto& [name, t] : params_) t.set_requires_grad(trainable);
}

Model build_model(const ModelConfig& config, std::uint64_t seed) { return Model(config, seed); }

std::size_t count_params(const ModelConfig& config) {
  if (config.enc_channels.empty()) return 0;
  return Model(config, 0).num_parameters();
}

}  // namespace atkl
