#include <algorithm>
#include <cmath>

#include "internal.hpp"

namespace atkl {

using detail::Node;

namespace {

// View of `shape` as (outer, extent, inner) around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for rank " +
                     std::to_string(shape.size()));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape reduced_shape(const Shape& shape, std::size_t axis, bool keepdim) {
  Shape out = shape;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

}  // namespace

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  return detail::make_result("sum", Shape{}, {total}, {a.node()}, [](Node& self) {
    auto gi = self.inputs[0]->grad_buffer();
    const double g = self.grad[0];
    for (auto& v : gi) v += g;
  });
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis("sum", a.shape(), axis);
  auto av = a.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = av.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  return detail::make_result("sum_axis", reduced_shape(a.shape(), axis, keepdim), std::move(out),
                             {a.node()}, [s](Node& self) {
                               auto gi = self.inputs[0]->grad_buffer();
                               for (std::size_t o = 0; o < s.outer; ++o) {
                                 for (std::size_t e = 0; e < s.extent; ++e) {
                                   double* dst = gi.data() + (o * s.extent + e) * s.inner;
                                   const double* src = self.grad.data() + o * s.inner;
                                   for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                                 }
                               }
                             });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) {
  const double extent = static_cast<double>(a.dim(axis));
  return scale(sum(a, axis, keepdim), 1.0 / extent);
}

Tensor l2_norm(const Tensor& a) {
  double ss = 0.0;
  for (double v : a.values()) ss += v * v;
  const double norm = std::sqrt(ss);
  return detail::make_result("l2_norm", Shape{}, {norm}, {a.node()}, [](Node& self) {
    const double norm = self.value[0];
    if (norm == 0.0) return;
    Node& in = *self.inputs[0];
    auto gi = in.grad_buffer();
    const double g = self.grad[0] / norm;
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g * in.value[i];
  });
}

Tensor l2_norm(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit s = split_axis("l2_norm", a.shape(), axis);
  auto av = a.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const double v = av[(o * s.extent + e) * s.inner + i];
        out[o * s.inner + i] += v * v;
      }
    }
  }
  for (auto& v : out) v = std::sqrt(v);
  return detail::make_result(
      "l2_norm_axis", reduced_shape(a.shape(), axis, keepdim), std::move(out), {a.node()},
      [s](Node& self) {
        Node& in = *self.inputs[0];
        auto gi = in.grad_buffer();
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const double norm = self.value[o * s.inner + i];
            if (norm == 0.0) continue;
            const double g = self.grad[o * s.inner + i] / norm;
            for (std::size_t e = 0; e < s.extent; ++e) {
              const std::size_t k = (o * s.extent + e) * s.inner + i;
              gi[k] += g * in.value[k];
            }
          }
        }
      });
}

Tensor cumsum(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis("cumsum", a.shape(), axis);
  auto av = a.values();
  std::vector<double> out(av.begin(), av.end());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 1; e < s.extent; ++e) {
      double* cur = out.data() + (o * s.extent + e) * s.inner;
      const double* prev = cur - s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) cur[i] += prev[i];
    }
  }
  return detail::make_result("cumsum", a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    auto gi = self.inputs[0]->grad_buffer();
    std::vector<double> running(s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::fill(running.begin(), running.end(), 0.0);
      for (std::size_t e = s.extent; e-- > 0;) {
        const std::size_t base = (o * s.extent + e) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) {
          running[i] += self.grad[base + i];
          gi[base + i] += running[i];
        }
      }
    }
  });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit s = split_axis("softmax", a.shape(), axis);
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
      double peak = av[at(0)];
      for (std::size_t e = 1; e < s.extent; ++e) peak = std::max(peak, av[at(e)]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        out[at(e)] = std::exp(av[at(e)] - peak);
        total += out[at(e)];
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[at(e)] /= total;
    }
  }
  return detail::make_result("softmax", a.shape(), std::move(out), {a.node()}, [s](Node& self) {
    auto gi = self.inputs[0]->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        auto at = [&](std::size_t e) { return (o * s.extent + e) * s.inner + i; };
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) dot += self.grad[at(e)] * self.value[at(e)];
        for (std::size_t e = 0; e < s.extent; ++e) {
          gi[at(e)] += self.value[at(e)] * (self.grad[at(e)] - dot);
        }
      }
    }
  });
}

}  // namespace atkl
