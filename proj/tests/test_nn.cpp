#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "atkl/gradcheck.hpp"
#include "atkl/nn.hpp"
#include "support/helpers.hpp"

using namespace atkl;
using namespace atkl::nn;
using atkl::testing::max_abs_diff;
using atkl::testing::random_tensor;
using atkl::testing::to_vec;

namespace {

const Conv2dGeometry kEncoderGeo{2, 1, 2, 2, 1, 0};

// Complex kernels multiplied with complex patches, one output at a time.
std::vector<double> complex_conv_oracle(const ComplexConv2d& conv, const Tensor& x) {
  const std::size_t cin = x.dim(0) / 2, h = x.dim(1), w = x.dim(2);
  const std::size_t cout = conv.w_real.dim(0), kh = conv.w_real.dim(2), kw = conv.w_real.dim(3);
  const auto& g = conv.geometry;
  const std::size_t oh = (h + g.pad_top + g.pad_bottom - kh) / g.stride_h + 1;
  const std::size_t ow = (w + g.pad_left + g.pad_right - kw) / g.stride_w + 1;
  std::vector<double> out(2 * cout * oh * ow);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::complex<double> acc(conv.b_real[o], conv.b_imag[o]);
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t p = 0; p < kh; ++p)
            for (std::size_t q = 0; q < kw; ++q) {
              const long r = static_cast<long>(i * g.stride_h + p) - static_cast<long>(g.pad_top);
              const long s = static_cast<long>(j * g.stride_w + q) - static_cast<long>(g.pad_left);
              if (r < 0 || s < 0 || r >= static_cast<long>(h) || s >= static_cast<long>(w)) continue;
              const std::size_t widx = ((o * cin + c) * kh + p) * kw + q;
              const std::complex<double> k(conv.w_real[widx], conv.w_imag[widx]);
              const std::complex<double> v(x[(c * h + r) * w + s], x[((cin + c) * h + r) * w + s]);
              acc += k * v;
            }
        out[(o * oh + i) * ow + j] = acc.real();
        out[((cout + o) * oh + i) * ow + j] = acc.imag();
      }
  return out;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM cell step with explicit loops.
void cell_step(const LstmLayer& l, const double* x, std::vector<double>& h, std::vector<double>& c) {
  const std::size_t d = l.w_ih.dim(0), hid = l.hidden();
  std::vector<double> z(4 * hid);
  for (std::size_t k = 0; k < 4 * hid; ++k) {
    double acc = l.bias[k];
    for (std::size_t i = 0; i < d; ++i) acc += x[i] * l.w_ih[i * 4 * hid + k];
    for (std::size_t i = 0; i < hid; ++i) acc += h[i] * l.w_hh[i * 4 * hid + k];
    z[k] = acc;
  }
  for (std::size_t k = 0; k < hid; ++k) {
    const double ig = sigmoid_ref(z[k]), fg = sigmoid_ref(z[hid + k]);
    const double gg = std::tanh(z[2 * hid + k]), og = sigmoid_ref(z[3 * hid + k]);
    c[k] = fg * c[k] + ig * gg;
    h[k] = og * std::tanh(c[k]);
  }
}

}  // namespace

TEST_CASE("complex conv with zero imaginary kernel is two real convolutions") {
  std::mt19937_64 rng(31);
  ComplexConv2d conv(2, 3, 5, 2, kEncoderGeo, false, rng);
  conv.w_imag = Tensor(conv.w_imag.shape(), 0.0);
  conv.b_real = Tensor(conv.b_real.shape(), 0.0);
  conv.b_imag = Tensor(conv.b_imag.shape(), 0.0);
  Tensor x = random_tensor({4, 9, 6}, rng);
  Tensor y = conv.forward(x);
  Tensor yr = conv2d(slice(x, 0, 0, 2), conv.w_real, kEncoderGeo);
  Tensor yi = conv2d(slice(x, 0, 2, 4), conv.w_real, kEncoderGeo);
  CHECK(max_abs_diff(slice(y, 0, 0, 3).values(), yr.values()) < 1e-14);
  CHECK(max_abs_diff(slice(y, 0, 3, 6).values(), yi.values()) < 1e-14);
}

TEST_CASE("complex conv matches complex arithmetic") {
  std::mt19937_64 rng(32);
  ComplexConv2d conv(2, 3, 5, 2, kEncoderGeo, false, rng);
  Tensor x = random_tensor({4, 9, 6}, rng);
  CHECK(max_abs_diff(conv.forward(x).values(), complex_conv_oracle(conv, x)) < 1e-10);
}

TEST_CASE("transposed complex conv is the adjoint of the forward complex conv") {
  // With biases removed, <C x, y> = <x, C^T y> where C^T uses the same complex
  // kernel. Real inner product of stacked tensors equals Re<.,.> of complex
  // vectors, and the complex adjoint conjugates the kernel.
  std::mt19937_64 rng(33);
  ComplexConv2d fwd(2, 3, 5, 2, kEncoderGeo, false, rng);
  ComplexConv2d bwd(3, 2, 5, 2, kEncoderGeo, true, rng);
  bwd.w_real = fwd.w_real;
  bwd.w_imag = neg(fwd.w_imag).detach();
  for (auto* b : {&fwd.b_real, &fwd.b_imag}) *b = Tensor(b->shape(), 0.0);
  bwd.b_real = Tensor({2}, 0.0);
  bwd.b_imag = Tensor({2}, 0.0);
  Tensor x = random_tensor({4, 9, 6}, rng);
  Tensor cx = fwd.forward(x);
  Tensor y = random_tensor(cx.shape(), rng);
  Tensor cty = bwd.forward(y);
  REQUIRE(cty.shape() == x.shape());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * cty[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv block on zero input is the activation of the normalized bias") {
  std::mt19937_64 rng(34);
  ConvBlock block(1, 4, 5, 2, kEncoderGeo, false, rng);
  Tensor x({2, 9, 5}, 0.0);
  Tensor pre = block.conv.forward(x);
  for (std::size_t c = 0; c < 8; ++c) {
    const double b = c < 4 ? block.conv.b_real[c] : block.conv.b_imag[c - 4];
    for (std::size_t k = 0; k < 5 * 5; ++k) CHECK(pre[c * 25 + k] == b);
  }
  Tensor y = block.forward(x);
  CHECK(to_vec(y) == to_vec(block.act.forward(block.norm.forward(pre))));
  for (double v : y.values()) CHECK(std::isfinite(v));
}

TEST_CASE("complex conv is linear before normalization") {
  std::mt19937_64 rng(35);
  ComplexConv2d conv(2, 2, 5, 2, kEncoderGeo, false, rng);
  Tensor x = random_tensor({4, 9, 6}, rng), y = random_tensor({4, 9, 6}, rng);
  Tensor zero = conv.forward(Tensor({4, 9, 6}, 0.0));
  Tensor lhs = sub(conv.forward(add(scale(x, 2.0), scale(y, -0.5))), zero);
  Tensor rhs = add(scale(sub(conv.forward(x), zero), 2.0), scale(sub(conv.forward(y), zero), -0.5));
  CHECK(max_abs_diff(lhs.values(), rhs.values()) < 1e-12);
}

TEST_CASE("cumulative norm uses only past frames") {
  std::mt19937_64 rng(36);
  CumulativeNorm norm(4);
  Tensor x = random_tensor({4, 5, 8}, rng);
  Tensor full = norm.forward(x);
  // Rebuild the first four frames alone.
  std::vector<double> head;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t f = 0; f < 5; ++f)
      for (std::size_t t = 0; t < 4; ++t) head.push_back(x[(c * 5 + f) * 8 + t]);
  Tensor part = norm.forward(Tensor({4, 5, 4}, head));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t f = 0; f < 5; ++f)
      for (std::size_t t = 0; t < 4; ++t) CHECK(part[(c * 5 + f) * 4 + t] == full[(c * 5 + f) * 8 + t]);

  // Frame 0 of complex channel 1 (stacked channels 1 and 3): pooled moments.
  double m = 0.0, sq = 0.0;
  for (std::size_t ch : {1u, 3u})
    for (std::size_t f = 0; f < 5; ++f) {
      m += full[(ch * 5 + f) * 8];
      sq += full[(ch * 5 + f) * 8] * full[(ch * 5 + f) * 8];
    }
  CHECK(std::abs(m) < 1e-12);
  CHECK(sq / 10.0 == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS_AS(norm.forward(Tensor({3, 5, 8}, 0.0)), ShapeError);
}

TEST_CASE("cumulative norm matches composed reference and passes grad_check") {
  std::mt19937_64 rng(42);
  CumulativeNorm norm(6);
  norm.gamma = random_tensor({6, 1, 1}, rng, 0.5, 1.5).set_requires_grad();
  norm.beta = random_tensor({6, 1, 1}, rng).set_requires_grad();
  Tensor x = random_tensor({6, 4, 7}, rng);

  // Same statistics built from elementary differentiable ops.
  auto reference = [&](const Tensor& in, const Tensor& g, const Tensor& b) {
    std::vector<double> inv(7);
    for (std::size_t j = 0; j < 7; ++j) inv[j] = 1.0 / static_cast<double>(2 * 4 * (j + 1));
    const Tensor count({7}, inv);
    const Tensor x4 = reshape(in, {2, 3, 4, 7});
    Tensor m = mul(cumsum(sum(sum(x4, 2), 0), 1), count);
    Tensor sq = mul(cumsum(sum(sum(square(x4), 2), 0), 1), count);
    Tensor sd = sqrt(add_scalar(sub(sq, square(m)), CumulativeNorm::kVarianceEpsilon));
    Tensor y = div(sub(x4, reshape(m, {1, 3, 1, 7})), reshape(sd, {1, 3, 1, 7}));
    return add(mul(reshape(y, {6, 4, 7}), g), b);
  };
  CHECK(max_abs_diff(norm.forward(x).values(), reference(x, norm.gamma, norm.beta).values()) < 1e-12);

  Tensor weights = random_tensor({6, 4, 7}, rng);
  auto report = grad_check(
      [&](const std::vector<Tensor>& in) {
        CumulativeNorm probe;
        probe.gamma = in[1];
        probe.beta = in[2];
        return sum(mul(probe.forward(in[0]), weights));
      },
      {x, norm.gamma, norm.beta});
  CHECK(report.passed(1e-6));
}

TEST_CASE("conv bias survives normalization") {
  std::mt19937_64 rng(41);
  ConvBlock block(1, 2, 5, 2, kEncoderGeo, false, rng);
  Tensor x = random_tensor({2, 9, 4}, rng);
  Tensor before = block.forward(x);
  block.conv.b_real = add_scalar(block.conv.b_real, 0.5).detach();
  CHECK(max_abs_diff(block.forward(x).values(), before.values()) > 1e-3);
}

TEST_CASE("lstm examples") {
  std::mt19937_64 rng(37);
  LstmLayer zero(2, 3, rng);
  zero.w_ih = Tensor(zero.w_ih.shape(), 0.0);
  zero.w_hh = Tensor(zero.w_hh.shape(), 0.0);
  zero.bias = Tensor(zero.bias.shape(), 0.0);
  Tensor out = zero.forward(random_tensor({5, 2}, rng));
  for (double v : out.values()) CHECK(v == 0.0);

  LstmLayer layer(2, 2, rng);
  for (std::size_t k = 0; k < 2; ++k) CHECK(layer.bias[2 + k] == 1.0);  // forget gate
  Tensor x = random_tensor({3, 2}, rng);
  Tensor y = layer.forward(x);
  REQUIRE(y.shape() == Shape{3, 2});
  std::vector<double> h(2, 0.0), c(2, 0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    cell_step(layer, x.values().data() + 2 * t, h, c);
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(y[t * 2 + k] - h[k]) < 1e-12);
    if (t == 0) {
      // T = 1 equals a single cell evaluation.
      Tensor single = layer.forward(slice(x, 0, 0, 1));
      for (std::size_t k = 0; k < 2; ++k) CHECK(single[k] == y[k]);
    }
  }
}

TEST_CASE("lstm stack output is causal") {
  std::mt19937_64 rng(38);
  LstmStack stack(4, 3, 2, rng);
  Tensor x = random_tensor({10, 4}, rng);
  Tensor full = stack.forward(x);
  for (std::size_t t : {1u, 4u, 9u}) {
    Tensor part = stack.forward(slice(x, 0, 0, t));
    for (std::size_t i = 0; i < t * 3; ++i) CHECK(part[i] == full[i]);
  }
}

TEST_CASE("apply_mask examples") {
  std::mt19937_64 rng(39);
  StftConfig cfg{8000, 8, 4, 8};
  Spectrogram s{random_tensor({5, 3}, rng), random_tensor({5, 3}, rng), cfg};
  Spectrogram unit = apply_mask(s, Tensor({5, 3}, 1.0), Tensor({5, 3}, 0.0));
  CHECK(to_vec(unit.real) == to_vec(s.real));
  CHECK(to_vec(unit.imag) == to_vec(s.imag));
  Spectrogram zero = apply_mask(s, Tensor({5, 3}, 0.0), Tensor({5, 3}, 0.0));
  for (double v : zero.real.values()) CHECK(v == 0.0);
  Spectrogram rot = apply_mask(s, Tensor({5, 3}, 0.0), Tensor({5, 3}, 1.0));
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(rot.real[i] == -s.imag[i]);
    CHECK(rot.imag[i] == s.real[i]);
  }
  CHECK_THROWS_AS(apply_mask(s, Tensor({5, 2}, 1.0), Tensor({5, 2}, 0.0)), ShapeError);
}

TEST_CASE("complex_concat interleaves real and imaginary halves") {
  Tensor a({2, 1, 1}, {1, 2});        // re 1, im 2
  Tensor b({4, 1, 1}, {3, 4, 5, 6});  // re 3 4, im 5 6
  CHECK(to_vec(complex_concat(a, b)) == std::vector<double>{1, 3, 4, 2, 5, 6});
}

TEST_CASE("blocks pass grad_check under a scalar loss") {
  std::mt19937_64 rng(40);
  SUBCASE("encoder block") {
    ConvBlock block(1, 2, 5, 2, kEncoderGeo, false, rng);
    Tensor weights = random_tensor({4, 5, 4}, rng);
    ParameterList params;
    block.collect("b", params);
    std::vector<Tensor> inputs{random_tensor({2, 9, 4}, rng)};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto report = grad_check(
        [&](const std::vector<Tensor>& in) { return sum(mul(block.forward(in[0]), weights)); }, inputs);
    CHECK(report.passed(1e-3));
  }
  SUBCASE("decoder block") {
    ConvBlock block(2, 1, 5, 2, Conv2dGeometry{2, 1, 2, 2, 0, 1}, true, rng);
    Tensor weights = random_tensor({2, 9, 4}, rng);
    ParameterList params;
    block.collect("b", params);
    std::vector<Tensor> inputs{random_tensor({4, 5, 4}, rng)};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto report = grad_check(
        [&](const std::vector<Tensor>& in) { return sum(mul(block.forward(in[0]), weights)); }, inputs);
    CHECK(report.passed(1e-3));
  }
  SUBCASE("lstm stack and linear") {
    LstmStack stack(3, 4, 2, rng);
    Linear proj(4, 2, rng);
    Tensor weights = random_tensor({6, 2}, rng);
    ParameterList params;
    stack.collect("l", params);
    proj.collect("p", params);
    std::vector<Tensor> inputs{random_tensor({6, 3}, rng)};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto report = grad_check(
        [&](const std::vector<Tensor>& in) { return sum(mul(proj.forward(stack.forward(in[0])), weights)); },
        inputs);
    CHECK(report.passed(1e-3));
  }
  SUBCASE("mask") {
    StftConfig cfg{8000, 8, 4, 8};
    auto report = grad_check(
        [&](const std::vector<Tensor>& in) {
          Spectrogram out = apply_mask(Spectrogram{in[0], in[1], cfg}, in[2], in[3]);
          return add(sum(square(out.real)), sum(out.imag));
        },
        {random_tensor({5, 3}, rng), random_tensor({5, 3}, rng), random_tensor({5, 3}, rng),
         random_tensor({5, 3}, rng)});
    CHECK(report.passed(1e-3));
  }
}
