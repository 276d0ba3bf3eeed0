#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "atkl/tensor.hpp"

namespace atkl {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  /// Max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) per input.
  std::vector<double> max_rel_error;
  /// Entries whose analytic or numeric gradient was not finite, per input.
  std::vector<std::size_t> nonfinite;
  std::size_t entries_checked = 0;

  double worst() const;
  bool passed(double tolerance) const;
};

/// Compares reverse-mode gradients of scalar `f` with central differences.
/// `inputs` must be leaves; they are flagged grad-enabled and their grads
/// reset. When `max_entries_per_input` is nonzero, a deterministic subset of
/// each input's entries is probed.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> inputs, double eps = 1e-5,
                           std::size_t max_entries_per_input = 0, std::uint64_t seed = 0);

double relative_error(double analytic, double numeric);

}  // namespace atkl
