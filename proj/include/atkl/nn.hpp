#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "atkl/signal.hpp"
#include "atkl/tensor.hpp"

namespace atkl::nn {

/// Ordered (name, tensor handle) pairs. Handles alias the model's storage.
using ParameterList = std::vector<std::pair<std::string, Tensor>>;

/// Uniform U(-1/sqrt(fan_in), 1/sqrt(fan_in)), grad-enabled.
Tensor uniform_parameter(Shape shape, std::size_t fan_in, std::mt19937_64& rng);
Tensor constant_parameter(Shape shape, double value);

/// Complex 2-D convolution on channel-stacked tensors: the first half of the
/// channel axis holds real parts, the second half imaginary parts.
///
///   y_re = W_re * x_re - W_im * x_im,  y_im = W_im * x_re + W_re * x_im
///
/// Weights are (out, in, kh, kw) for forward convolution and (in, out, kh, kw)
/// for the transposed variant. Channel counts are complex channels.
class ComplexConv2d {
 public:
  ComplexConv2d() = default;
  ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kh, std::size_t kw,
                Conv2dGeometry geometry, bool transposed, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor w_real, w_imag;  // (out, in, kh, kw) or (in, out, kh, kw) when transposed
  Tensor b_real, b_imag;  // (out)
  Conv2dGeometry geometry;
  bool transposed = false;

 private:
  std::size_t in_ = 0, out_ = 0;
};

/// Affine normalization of channel-stacked complex features. Statistics of
/// complex channel c pool its real and imaginary parts over the frequency
/// axis and all frames up to the current one, so the output is causal and
/// deterministic at batch size 1. Pooling also keeps the preceding conv bias
/// from cancelling out. gamma/beta are per stacked channel.
class CumulativeNorm {
 public:
  CumulativeNorm() = default;
  explicit CumulativeNorm(std::size_t channels);

  Tensor forward(const Tensor& x) const;  // x: (C, F, T)
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor gamma, beta;  // (C, 1, 1)
  static constexpr double kVarianceEpsilon = 1e-5;
};

class PRelu {
 public:
  PRelu() = default;
  explicit PRelu(std::size_t channels, double init = 0.25);

  Tensor forward(const Tensor& x) const { return prelu(x, slope); }
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor slope;  // (C, 1, 1)
};

/// Complex convolution -> cumulative norm -> PReLU. Norm and activation act
/// on real and imaginary channels independently.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kh, std::size_t kw,
            Conv2dGeometry geometry, bool transposed, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const { return act.forward(norm.forward(conv.forward(x))); }
  void collect(const std::string& prefix, ParameterList& out) const;

  ComplexConv2d conv;
  CumulativeNorm norm;
  PRelu act;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const { return add(matmul(x, weight), bias); }  // x: (T, in)
  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;  // (in, out)
  Tensor bias;    // (out)
};

/// Unidirectional LSTM layer; gates ordered i, f, g, o.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(std::size_t input, std::size_t hidden, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;  // (T, D) -> (T, H); state starts at zero
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t hidden() const { return hidden_; }

  Tensor w_ih;  // (D, 4H)
  Tensor w_hh;  // (H, 4H)
  Tensor bias;  // (4H), forget-gate slice initialized to 1

 private:
  std::size_t hidden_ = 0;
};

class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(std::size_t input, std::size_t hidden, std::size_t layers, std::mt19937_64& rng);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
  std::size_t num_layers() const { return layers_.size(); }
  LstmLayer& layer(std::size_t i) { return layers_.at(i); }

 private:
  std::vector<LstmLayer> layers_;
};

/// Complex ratio masking of a spectrogram.
Spectrogram apply_mask(const Spectrogram& noisy, const Tensor& mask_real, const Tensor& mask_imag);

/// Interleaves two channel-stacked complex tensors: [re_a, re_b, im_a, im_b].
Tensor complex_concat(const Tensor& a, const Tensor& b);

}  // namespace atkl::nn
