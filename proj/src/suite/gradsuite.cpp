#include <random>

#include "atkl/distill.hpp"
#include "atkl/gradcheck.hpp"
#include "atkl/gradsuite.hpp"
#include "atkl/nn.hpp"

namespace atkl {

namespace {

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v));
}

struct OpCase {
  const char* name;
  std::vector<Shape> shapes;
  double lo, hi;
  ScalarFn fn;
};

// Builds fresh inputs for one trial and returns the function to check.
struct ModuleCase {
  const char* name;
  std::function<std::pair<ScalarFn, std::vector<Tensor>>(std::mt19937_64&)> setup;
};

constexpr double kTolerance = 1e-3;
constexpr Conv2dGeometry kDown{2, 1, 2, 2, 1, 0};
constexpr Conv2dGeometry kUp{2, 1, 2, 2, 0, 1};

std::vector<OpCase> op_cases(const Tensor& w) {
  // A fixed random weighting makes every output element matter.
  auto weighted = [w](const Tensor& t) { return sum(mul(t, w)); };
  return {
      {"add", {{3, 4}, {3, 4}}, -1, 1, [=](auto& in) { return weighted(add(in[0], in[1])); }},
      {"sub", {{3, 4}, {4}}, -1, 1, [=](auto& in) { return weighted(sub(in[0], in[1])); }},
      {"mul", {{3, 4}, {3, 1}}, -1, 1, [=](auto& in) { return weighted(mul(in[0], in[1])); }},
      {"div", {{3, 4}, {3, 4}}, 0.5, 2, [=](auto& in) { return weighted(div(in[0], in[1])); }},
      {"neg", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(neg(in[0])); }},
      {"abs", {{3, 4}}, 0.1, 1, [=](auto& in) { return weighted(abs(in[0])); }},
      {"square", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(square(in[0])); }},
      {"pow", {{3, 4}}, 0.2, 2, [=](auto& in) { return weighted(pow(in[0], 1.5)); }},
      {"sqrt", {{3, 4}}, 0.2, 2, [=](auto& in) { return weighted(sqrt(in[0])); }},
      {"log", {{3, 4}}, 0.2, 2, [=](auto& in) { return weighted(log(in[0])); }},
      {"exp", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(exp(in[0])); }},
      {"sigmoid", {{3, 4}}, -3, 3, [=](auto& in) { return weighted(sigmoid(in[0])); }},
      {"tanh", {{3, 4}}, -2, 2, [=](auto& in) { return weighted(tanh(in[0])); }},
      {"prelu", {{3, 4}, {3, 1}}, -1, 1, [=](auto& in) { return weighted(prelu(in[0], in[1])); }},
      {"scale", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(scale(in[0], -1.5)); }},
      {"add_scalar", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(square(add_scalar(in[0], 0.3))); }},
      {"clamp_min", {{3, 4}}, 0.2, 2, [=](auto& in) { return weighted(clamp_min(in[0], 0.1)); }},
      {"clamp", {{3, 4}}, -0.5, 0.5, [=](auto& in) { return weighted(clamp(in[0], -1.0, 1.0)); }},
      {"sum", {{3, 4}}, -1, 1, [](auto& in) { return square(sum(in[0])); }},
      {"mean", {{3, 4}}, -1, 1, [](auto& in) { return square(mean(in[0])); }},
      {"sum_axis", {{3, 4}}, -1, 1, [](auto& in) { return sum(square(sum(in[0], 1))); }},
      {"mean_axis", {{3, 4}}, -1, 1, [](auto& in) { return sum(square(mean(in[0], 0))); }},
      {"l2_norm", {{3, 4}}, -1, 1, [](auto& in) { return l2_norm(in[0]); }},
      {"l2_norm_axis", {{3, 4}}, -1, 1, [](auto& in) { return sum(l2_norm(in[0], 1)); }},
      {"cumsum", {{3, 4}}, -1, 1, [=](auto& in) { return weighted(square(cumsum(in[0], 1))); }},
      {"softmax", {{3, 4}}, -2, 2, [=](auto& in) { return weighted(softmax(in[0], 1)); }},
      {"matmul", {{3, 4}, {4, 2}}, -1, 1, [](auto& in) { return sum(square(matmul(in[0], in[1]))); }},
      {"conv2d", {{2, 7, 4}, {3, 2, 5, 2}}, -1, 1,
       [](auto& in) { return sum(square(conv2d(in[0], in[1], kDown))); }},
      {"conv_transpose2d", {{2, 4, 4}, {2, 3, 5, 2}}, -1, 1,
       [](auto& in) { return sum(square(conv_transpose2d(in[0], in[1], kUp))); }},
      {"concat", {{3, 1}, {3, 3}}, -1, 1, [=](auto& in) { return weighted(square(concat({in[0], in[1]}, 1))); }},
      {"slice", {{3, 4}}, -1, 1, [](auto& in) { return sum(square(slice(in[0], 1, 1, 3))); }},
      {"reshape", {{3, 4}}, -1, 1,
       [](auto& in) { return sum(square(mul(reshape(in[0], {4, 3}), Tensor({3}, {1, 2, 3})))); }},
      {"transpose", {{3, 4}}, -1, 1,
       [](auto& in) { return sum(square(mul(transpose(in[0]), Tensor({3}, {1, 2, 3})))); }},
      {"frame", {{13}}, -1, 1, [](auto& in) { return sum(square(frame(in[0], 4, 3))); }},
      {"overlap_add", {{4, 3}}, -1, 1, [](auto& in) { return sum(square(overlap_add(in[0], 2, 9))); }},
  };
}

template <class Module>
std::vector<Tensor> with_params(const Module& m, std::vector<Tensor> inputs) {
  nn::ParameterList params;
  m.collect("m", params);
  for (auto& [name, t] : params) inputs.push_back(t);
  return inputs;
}

std::vector<ModuleCase> module_cases() {
  using distill::CompressedMap;
  using distill::LayerPairing;
  std::vector<ModuleCase> cases;
  cases.push_back({"complex_conv2d", [](std::mt19937_64& rng) {
                     auto conv = std::make_shared<nn::ComplexConv2d>(1, 2, 5, 2, kDown, false, rng);
                     const Tensor w = uniform({4, 5, 4}, rng, -1, 1);
                     ScalarFn fn = [conv, w](auto& in) { return sum(mul(conv->forward(in[0]), w)); };
                     return std::pair{fn, with_params(*conv, {uniform({2, 9, 4}, rng, -1, 1)})};
                   }});
  cases.push_back({"cumulative_norm", [](std::mt19937_64& rng) {
                     auto norm = std::make_shared<nn::CumulativeNorm>(4);
                     norm->gamma.mutable_values()[1] = 1.7;
                     norm->beta.mutable_values()[2] = -0.4;
                     const Tensor w = uniform({4, 3, 5}, rng, -1, 1);
                     ScalarFn fn = [norm, w](auto& in) { return sum(mul(norm->forward(in[0]), w)); };
                     return std::pair{fn, with_params(*norm, {uniform({4, 3, 5}, rng, -1, 1)})};
                   }});
  cases.push_back({"conv_block_transposed", [](std::mt19937_64& rng) {
                     auto block = std::make_shared<nn::ConvBlock>(2, 1, 5, 2, kUp, true, rng);
                     const Tensor w = uniform({2, 9, 4}, rng, -1, 1);
                     ScalarFn fn = [block, w](auto& in) { return sum(mul(block->forward(in[0]), w)); };
                     return std::pair{fn, with_params(*block, {uniform({4, 5, 4}, rng, -1, 1)})};
                   }});
  cases.push_back({"lstm_linear", [](std::mt19937_64& rng) {
                     auto stack = std::make_shared<nn::LstmStack>(3, 4, 2, rng);
                     auto proj = std::make_shared<nn::Linear>(4, 2, rng);
                     const Tensor w = uniform({6, 2}, rng, -1, 1);
                     ScalarFn fn = [stack, proj, w](auto& in) {
                       return sum(mul(proj->forward(stack->forward(in[0])), w));
                     };
                     auto inputs = with_params(*stack, {uniform({6, 3}, rng, -1, 1)});
                     nn::ParameterList p;
                     proj->collect("p", p);
                     for (auto& [name, t] : p) inputs.push_back(t);
                     return std::pair{fn, inputs};
                   }});
  cases.push_back({"apply_mask", [](std::mt19937_64& rng) {
                     ScalarFn fn = [](auto& in) {
                       const Spectrogram out =
                           nn::apply_mask(Spectrogram{in[0], in[1], StftConfig{8000, 8, 4, 8}}, in[2], in[3]);
                       return add(sum(square(out.real)), sum(out.imag));
                     };
                     std::vector<Tensor> inputs;
                     for (int i = 0; i < 4; ++i) inputs.push_back(uniform({5, 3}, rng, -1, 1));
                     return std::pair{fn, inputs};
                   }});
  cases.push_back({"stft_pair", [](std::mt19937_64& rng) {
                     auto kernel = std::make_shared<StftKernel>(StftConfig{8000, 16, 4, 16});
                     const Tensor w = uniform({9, 5}, rng, -1, 1);
                     ScalarFn fn = [kernel, w](auto& in) {
                       const Spectrogram s = kernel->analyze(in[0]);
                       const Spectrogram t{mul(s.real, w), s.imag, s.config};
                       return sum(square(kernel->synthesize(t, 32)));
                     };
                     return std::pair{fn, std::vector<Tensor>{uniform({32}, rng, -1, 1)}};
                   }});
  cases.push_back({"time_at_channel_at", [](std::mt19937_64& rng) {
                     const Tensor w = uniform({5}, rng, -1, 1);
                     ScalarFn fn = [w](auto& in) { return sum(mul(distill::channel_at(distill::time_at(in[0])), w)); };
                     return std::pair{fn, std::vector<Tensor>{uniform({3, 5, 4}, rng, -1, 1)}};
                   }});
  cases.push_back({"at_loss_atkl_loss", [](std::mt19937_64& rng) {
                     // Teacher maps are detached inside the losses, so only the student taps vary.
                     const std::vector<CompressedMap> t{distill::compress_tap(uniform({2, 5, 3}, rng, -1, 1), false),
                                                        distill::compress_tap(uniform({4, 5, 3}, rng, -1, 1), true)};
                     ScalarFn fn = [t](auto& in) {
                       const std::vector<LayerPairing> pairing{{0, 0, false, false}, {1, 1, true, true}};
                       const std::vector<CompressedMap> s{distill::compress_tap(in[0], false),
                                                          distill::compress_tap(in[1], true)};
                       return add(distill::at_loss(t, s, pairing), scale(distill::atkl_loss(t, s, pairing), 60.0));
                     };
                     return std::pair{fn, std::vector<Tensor>{uniform({2, 5, 6}, rng, -1, 1), uniform({2, 5, 6}, rng, -1, 1)}};
                   }});
  cases.push_back({"si_snr_mix", [](std::mt19937_64& rng) {
                     const Tensor clean = uniform({40}, rng, -1, 1), teacher = uniform({40}, rng, -1, 1);
                     ScalarFn fn = [clean, teacher](auto& in) {
                       return distill::si_snr_mix_loss(in[0], clean, teacher, 0.5);
                     };
                     return std::pair{fn, std::vector<Tensor>{add(clean, uniform({40}, rng, -0.5, 0.5))}};
                   }});
  cases.push_back({"kd_loss_tiny_models", [](std::mt19937_64& rng) {
                     auto teacher = std::make_shared<Model>(ModelConfig::tiny_teacher(), rng());
                     auto student = std::make_shared<Model>(ModelConfig::tiny_student(), rng());
                     const Tensor clean = uniform({64}, rng, -0.5, 0.5);
                     const Tensor noisy = add(clean, uniform({64}, rng, -0.3, 0.3));
                     const auto pairing = distill::positional_pairing(teacher->config(), student->config());
                     auto targets = std::make_shared<distill::TeacherTargets>(
                         distill::teacher_targets(teacher->forward_tapped(noisy), pairing, 2.0));
                     ScalarFn fn = [=](auto&) {
                       return distill::kd_terms(*targets, student->forward_tapped(noisy), clean, pairing, {},
                                                distill::Mode::at_kl)
                           .total;
                     };
                     std::vector<Tensor> inputs;
                     for (const auto& [name, t] : student->parameters()) inputs.push_back(t);
                     return std::pair{fn, inputs};
                   }});
  return cases;
}

}  // namespace

std::vector<SuiteCase> run_gradient_suite(std::uint64_t seed, int trials) {
  std::mt19937_64 rng(seed);
  std::vector<SuiteCase> out;
  auto record = [&](const char* name, const std::function<GradCheckReport()>& run) {
    SuiteCase c{name, 0.0, kTolerance, true};
    for (int t = 0; t < trials; ++t) {
      const GradCheckReport r = run();
      c.worst_rel_error = std::max(c.worst_rel_error, r.worst());
      c.passed = c.passed && r.passed(kTolerance);
    }
    out.push_back(c);
  };

  const Tensor w = uniform({3, 4}, rng, -1, 1);
  for (const auto& op : op_cases(w)) {
    record(op.name, [&] {
      std::vector<Tensor> inputs;
      for (const auto& s : op.shapes) inputs.push_back(uniform(s, rng, op.lo, op.hi));
      return grad_check(op.fn, inputs, 1e-5);
    });
  }
  for (const auto& m : module_cases()) {
    record(m.name, [&] {
      auto [fn, inputs] = m.setup(rng);
      return grad_check(fn, inputs, 1e-5);
    });
  }
  return out;
}

}  // namespace atkl
