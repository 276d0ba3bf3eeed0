#include "atkl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>

namespace atkl {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (double e : max_rel_error) w = std::max(w, e);
  return w;
}

bool GradCheckReport::passed(double tolerance) const {
  const bool all_finite =
      std::all_of(nonfinite.begin(), nonfinite.end(), [](std::size_t n) { return n == 0; });
  return all_finite && worst() < tolerance;
}

GradCheckReport grad_check(const ScalarFn& f, std::vector<Tensor> inputs, double eps,
                           std::size_t max_entries_per_input, std::uint64_t seed) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  GradCheckReport report;
  report.max_rel_error.assign(inputs.size(), 0.0);
  report.nonfinite.assign(inputs.size(), 0);

  backward(f(inputs));

  auto eval = [&]() -> double {
    NoGradGuard guard;
    try {
      return f(inputs).item();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k];
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

    std::vector<std::size_t> entries(x.numel());
    std::iota(entries.begin(), entries.end(), 0);
    if (max_entries_per_input != 0 && entries.size() > max_entries_per_input) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(max_entries_per_input);
    }
    auto values = x.mutable_values();
    for (std::size_t i : entries) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = eval();
      values[i] = saved - eps;
      const double down = eval();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      ++report.entries_checked;
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
        ++report.nonfinite[k];
        continue;
      }
      report.max_rel_error[k] = std::max(report.max_rel_error[k], relative_error(analytic[i], numeric));
    }
  }
  return report;
}

}  // namespace atkl
