#include <cmath>

#include "../tensor/internal.hpp"
#include "atkl/nn.hpp"

namespace atkl::nn {

Tensor uniform_parameter(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad();
  return t;
}

Tensor constant_parameter(Shape shape, double value) {
  Tensor t(std::move(shape), value);
  t.set_requires_grad();
  return t;
}

ComplexConv2d::ComplexConv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kh,
                             std::size_t kw, Conv2dGeometry geo, bool transposed_,
                             std::mt19937_64& rng)
    : geometry(geo), transposed(transposed_), in_(in_channels), out_(out_channels) {
  const Shape w_shape = transposed ? Shape{in_, out_, kh, kw} : Shape{out_, in_, kh, kw};
  const std::size_t fan_in = 2 * in_ * kh * kw;
  w_real = uniform_parameter(w_shape, fan_in, rng);
  w_imag = uniform_parameter(w_shape, fan_in, rng);
  b_real = uniform_parameter({out_}, fan_in, rng);
  b_imag = uniform_parameter({out_}, fan_in, rng);
}

Tensor ComplexConv2d::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != 2 * in_) {
    throw ShapeError("complex_conv: expected (" + std::to_string(2 * in_) + ", F, T) input, got " +
                     shape_str(x.shape()));
  }
  const Tensor neg_imag = neg(w_imag);
  Tensor bias = reshape(concat({b_real, b_imag}, 0), {2 * out_, 1, 1});
  if (!transposed) {
    // (2*out, 2*in) block [[Wr, -Wi], [Wi, Wr]]
    Tensor w = concat({concat({w_real, neg_imag}, 1), concat({w_imag, w_real}, 1)}, 0);
    return add(conv2d(x, w, geometry), bias);
  }
  // (2*in, 2*out) block [[Wr, Wi], [-Wi, Wr]]
  Tensor w = concat({concat({w_real, w_imag}, 1), concat({neg_imag, w_real}, 1)}, 0);
  return add(conv_transpose2d(x, w, geometry), bias);
}

void ComplexConv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".w_real", w_real);
  out.emplace_back(prefix + ".w_imag", w_imag);
  out.emplace_back(prefix + ".b_real", b_real);
  out.emplace_back(prefix + ".b_imag", b_imag);
}

CumulativeNorm::CumulativeNorm(std::size_t channels)
    : gamma(constant_parameter({channels, 1, 1}, 1.0)),
      beta(constant_parameter({channels, 1, 1}, 0.0)) {}

Tensor CumulativeNorm::forward(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != gamma.dim(0) || x.dim(0) % 2 != 0) {
    throw ShapeError("cumulative_norm: input " + shape_str(x.shape()) + " vs " +
                     std::to_string(gamma.dim(0)) + " channels");
  }
  const std::size_t c = x.dim(0) / 2, f = x.dim(1), t = x.dim(2);
  const auto xv = x.values();
  // Running moments per (complex channel, frame). Channel k's real part is
  // stacked channel k, its imaginary part stacked channel c + k.
  auto mean = std::make_shared<std::vector<double>>(c * t);
  auto stddev = std::make_shared<std::vector<double>>(c * t);
  for (std::size_t k = 0; k < c; ++k) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      for (std::size_t part : {k, c + k}) {
        for (std::size_t i = 0; i < f; ++i) {
          const double v = xv[(part * f + i) * t + j];
          s1 += v;
          s2 += v * v;
        }
      }
      const double n = static_cast<double>(2 * f * (j + 1));
      const double m = s1 / n;
      (*mean)[k * t + j] = m;
      (*stddev)[k * t + j] = std::sqrt(std::max(s2 / n - m * m, 0.0) + kVarianceEpsilon);
    }
  }

  const auto gv = gamma.values(), bv = beta.values();
  std::vector<double> out(xv.size());
  for (std::size_t ch = 0; ch < 2 * c; ++ch) {
    const std::size_t k = ch % c;
    for (std::size_t i = 0; i < f; ++i) {
      for (std::size_t j = 0; j < t; ++j) {
        const std::size_t idx = (ch * f + i) * t + j;
        out[idx] = gv[ch] * (xv[idx] - (*mean)[k * t + j]) / (*stddev)[k * t + j] + bv[ch];
      }
    }
  }

  return detail::make_result(
      "cumulative_norm", x.shape(), std::move(out), {x.node(), gamma.node(), beta.node()},
      [c, f, t, mean, stddev](detail::Node& self) {
        detail::Node& nx = *self.inputs[0];
        detail::Node& ng = *self.inputs[1];
        detail::Node& nb = *self.inputs[2];
        const auto& g = self.grad;
        const auto& xv = nx.value;
        const auto& gv = ng.value;
        auto xhat = [&](std::size_t idx, std::size_t k, std::size_t j) {
          return (xv[idx] - (*mean)[k * t + j]) / (*stddev)[k * t + j];
        };
        if (ng.requires_grad || nb.requires_grad) {
          std::vector<double> dg(2 * c, 0.0), db(2 * c, 0.0);
          for (std::size_t ch = 0; ch < 2 * c; ++ch) {
            for (std::size_t i = 0; i < f; ++i) {
              for (std::size_t j = 0; j < t; ++j) {
                const std::size_t idx = (ch * f + i) * t + j;
                dg[ch] += g[idx] * xhat(idx, ch % c, j);
                db[ch] += g[idx];
              }
            }
          }
          if (ng.requires_grad) {
            auto buf = ng.grad_buffer();
            for (std::size_t ch = 0; ch < 2 * c; ++ch) buf[ch] += dg[ch];
          }
          if (nb.requires_grad) {
            auto buf = nb.grad_buffer();
            for (std::size_t ch = 0; ch < 2 * c; ++ch) buf[ch] += db[ch];
          }
        }
        if (!nx.requires_grad) return;
        auto dx = nx.grad_buffer();
        std::vector<double> d_mean(t), d_sq(t);
        for (std::size_t k = 0; k < c; ++k) {
          // Per-frame sums of dL/dy and dL/dy * (x - mean) over both parts.
          for (std::size_t j = 0; j < t; ++j) {
            double a = 0.0, b = 0.0;
            for (std::size_t ch : {k, c + k}) {
              for (std::size_t i = 0; i < f; ++i) {
                const std::size_t idx = (ch * f + i) * t + j;
                const double gy = g[idx] * gv[ch];
                a += gy;
                b += gy * (xv[idx] - (*mean)[k * t + j]);
              }
            }
            const double s = (*stddev)[k * t + j], m = (*mean)[k * t + j];
            const double n = static_cast<double>(2 * f * (j + 1));
            const double ds = -b / (s * s);
            // var = E[x^2] - mean^2, std = sqrt(var + eps)
            d_mean[j] = (-a / s - ds * m / s) / n;
            d_sq[j] = ds / (2.0 * s) / n;
          }
          // Frame j's moments depend on every frame <= j: suffix sums.
          for (std::size_t j = t - 1; j-- > 0;) {
            d_mean[j] += d_mean[j + 1];
            d_sq[j] += d_sq[j + 1];
          }
          for (std::size_t ch : {k, c + k}) {
            for (std::size_t i = 0; i < f; ++i) {
              for (std::size_t j = 0; j < t; ++j) {
                const std::size_t idx = (ch * f + i) * t + j;
                dx[idx] += g[idx] * gv[ch] / (*stddev)[k * t + j] + d_mean[j] + 2.0 * xv[idx] * d_sq[j];
              }
            }
          }
        }
      });
}

void CumulativeNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

PRelu::PRelu(std::size_t channels, double init) : slope(constant_parameter({channels, 1, 1}, init)) {}

void PRelu::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".slope", slope);
}

ConvBlock::ConvBlock(std::size_t in_channels, std::size_t out_channels, std::size_t kh,
                     std::size_t kw, Conv2dGeometry geo, bool transposed, std::mt19937_64& rng)
    : conv(in_channels, out_channels, kh, kw, geo, transposed, rng),
      norm(2 * out_channels),
      act(2 * out_channels) {}

void ConvBlock::collect(const std::string& prefix, ParameterList& out) const {
  conv.collect(prefix + ".conv", out);
  norm.collect(prefix + ".norm", out);
  act.collect(prefix + ".act", out);
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(uniform_parameter({in, out}, in, rng)), bias(uniform_parameter({out}, in, rng)) {}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Spectrogram apply_mask(const Spectrogram& noisy, const Tensor& mask_real, const Tensor& mask_imag) {
  if (mask_real.shape() != noisy.real.shape() || mask_imag.shape() != noisy.imag.shape()) {
    throw ShapeError("apply_mask: mask " + shape_str(mask_real.shape()) + " vs spectrogram " +
                     shape_str(noisy.real.shape()));
  }
  return {sub(mul(noisy.real, mask_real), mul(noisy.imag, mask_imag)),
          add(mul(noisy.real, mask_imag), mul(noisy.imag, mask_real)), noisy.config};
}

Tensor complex_concat(const Tensor& a, const Tensor& b) {
  const std::size_t ha = a.dim(0) / 2, hb = b.dim(0) / 2;
  if (a.dim(0) % 2 != 0 || b.dim(0) % 2 != 0) {
    throw ShapeError("complex_concat: channel extents must be even");
  }
  return concat({slice(a, 0, 0, ha), slice(b, 0, 0, hb), slice(a, 0, ha, 2 * ha),
                 slice(b, 0, hb, 2 * hb)},
                0);
}

}  // namespace atkl::nn
