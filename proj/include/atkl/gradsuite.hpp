#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace atkl {

struct SuiteCase {
  std::string name;
  double worst_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Central-difference checks (eps 1e-5) of every differentiable op, the nn
/// layers, the STFT pair, the distillation losses and the full kd objective on
/// tiny models. Each case is checked on `trials` random draws and reports its
/// worst relative error.
std::vector<SuiteCase> run_gradient_suite(std::uint64_t seed = 0, int trials = 3);

}  // namespace atkl
