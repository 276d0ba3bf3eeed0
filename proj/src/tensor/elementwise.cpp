#include <algorithm>
#include <cmath>

#include "internal.hpp"

namespace atkl {

using detail::Node;
using detail::NodePtr;

namespace {

bool broadcastable_to(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  const std::size_t offset = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[i] != big[offset + i] && small[i] != 1) return false;
  }
  return true;
}

// For each flat index of `big`, the flat index of the broadcast operand.
std::vector<std::size_t> broadcast_index(const Shape& small, const Shape& big) {
  const std::size_t n = shape_numel(big);
  const std::size_t rank = big.size();
  const std::size_t offset = rank - small.size();
  std::vector<std::size_t> small_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t i = small.size(); i-- > 0;) {
    small_stride[offset + i] = small[i] == 1 ? 0 : stride;
    stride *= small[i];
  }
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t pos = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    index[flat] = pos;
    for (std::size_t d = rank; d-- > 0;) {
      pos += small_stride[d];
      if (++counter[d] < big[d]) break;
      pos -= small_stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

// Maps flat indices of the broadcast result to the smaller operand. When the
// small operand has at most one non-unit axis (per-channel parameters, biases)
// the index is (i / inner) % extent and no table is built.
class BroadcastMap {
 public:
  BroadcastMap() = default;
  BroadcastMap(const Shape& small, const Shape& big) {
    const std::size_t offset = big.size() - small.size();
    std::size_t axis = big.size(), count = 0;
    for (std::size_t i = 0; i < small.size(); ++i) {
      if (small[i] != 1) {
        axis = offset + i;
        ++count;
      }
    }
    if (count > 1) {
      table_ = std::make_shared<std::vector<std::size_t>>(broadcast_index(small, big));
      return;
    }
    extent_ = axis < big.size() ? big[axis] : 1;
    inner_ = 1;
    for (std::size_t d = axis + 1; d < big.size(); ++d) inner_ *= big[d];
  }

  template <class F>
  void for_each(std::size_t n, F&& f) const {
    if (table_) {
      const auto& t = *table_;
      for (std::size_t i = 0; i < n; ++i) f(i, t[i]);
      return;
    }
    const std::size_t block = inner_ * extent_;
    for (std::size_t base = 0; base < n; base += block) {
      for (std::size_t k = 0; k < extent_; ++k) {
        const std::size_t start = base + k * inner_;
        for (std::size_t i = start; i < start + inner_; ++i) f(i, k);
      }
    }
  }

 private:
  std::shared_ptr<std::vector<std::size_t>> table_;
  std::size_t inner_ = 1, extent_ = 1;
};

// Per-element forward value and partial derivatives for a binary op.
template <class V, class DA, class DB>
struct BinaryRule {
  V value;
  DA da;
  DB db;
};
template <class V, class DA, class DB>
BinaryRule(V, DA, DB) -> BinaryRule<V, DA, DB>;

template <class Rule>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, Rule rule) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out_shape;
  bool a_small = false;
  bool b_small = false;
  if (sa == sb) {
    out_shape = sa;
  } else if (broadcastable_to(sb, sa)) {
    out_shape = sa;
    b_small = true;
  } else if (broadcastable_to(sa, sb)) {
    out_shape = sb;
    a_small = true;
  } else {
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                     shape_str(sb));
  }
  const std::size_t n = shape_numel(out_shape);
  const BroadcastMap map =
      a_small ? BroadcastMap(sa, out_shape) : b_small ? BroadcastMap(sb, out_shape) : BroadcastMap();

  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  if (!a_small && !b_small) {
    for (std::size_t i = 0; i < n; ++i) out[i] = rule.value(av[i], bv[i]);
  } else if (b_small) {
    map.for_each(n, [&](std::size_t i, std::size_t j) { out[i] = rule.value(av[i], bv[j]); });
  } else {
    map.for_each(n, [&](std::size_t i, std::size_t j) { out[i] = rule.value(av[j], bv[i]); });
  }

  return detail::make_result(
      op, out_shape, std::move(out), {a.node(), b.node()},
      [rule, map, a_small, b_small](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        const auto& g = self.grad;
        const std::size_t n = g.size();
        const auto& x = na.value;
        const auto& y = nb.value;
        if (!a_small && !b_small) {
          if (na.requires_grad) {
            auto ga = na.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * rule.da(x[i], y[i]);
          }
          if (nb.requires_grad) {
            auto gb = nb.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * rule.db(x[i], y[i]);
          }
        } else if (b_small) {
          if (na.requires_grad) {
            auto ga = na.grad_buffer();
            map.for_each(n, [&](std::size_t i, std::size_t j) { ga[i] += g[i] * rule.da(x[i], y[j]); });
          }
          if (nb.requires_grad) {
            auto gb = nb.grad_buffer();
            map.for_each(n, [&](std::size_t i, std::size_t j) { gb[j] += g[i] * rule.db(x[i], y[j]); });
          }
        } else {
          if (na.requires_grad) {
            auto ga = na.grad_buffer();
            map.for_each(n, [&](std::size_t i, std::size_t j) { ga[j] += g[i] * rule.da(x[j], y[i]); });
          }
          if (nb.requires_grad) {
            auto gb = nb.grad_buffer();
            map.for_each(n, [&](std::size_t i, std::size_t j) { gb[i] += g[i] * rule.db(x[j], y[i]); });
          }
        }
      });
}

// Unary op whose derivative is expressed through input x, output y and a
// captured parameter.
template <class V, class D>
struct UnaryRule {
  V value;      // (x, p)
  D deriv;      // (x, y, p)
};
template <class V, class D>
UnaryRule(V, D) -> UnaryRule<V, D>;

template <class Rule>
Tensor unary_op(const char* op, const Tensor& a, Rule rule, double param = 0.0) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = rule.value(av[i], param);
  return detail::make_result(op, a.shape(), std::move(out), {a.node()},
                             [rule, param](Node& self) {
                               Node& in = *self.inputs[0];
                               auto gi = in.grad_buffer();
                               for (std::size_t i = 0; i < gi.size(); ++i) {
                                 gi[i] += self.grad[i] * rule.deriv(in.value[i], self.value[i], param);
                               }
                             });
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op("add", a, b,
                   BinaryRule{[](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
                    [](double, double) { return 1.0; }});
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op("sub", a, b,
                   BinaryRule{[](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
                    [](double, double) { return -1.0; }});
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op("mul", a, b,
                   BinaryRule{[](double x, double y) { return x * y; }, [](double, double y) { return y; },
                    [](double x, double) { return x; }});
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op("div", a, b,
                   BinaryRule{[](double x, double y) { return x / y; },
                    [](double, double y) { return 1.0 / y; },
                    [](double x, double y) { return -x / (y * y); }});
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  return binary_op("prelu", x, slope,
                   BinaryRule{[](double v, double s) { return std::max(v, 0.0) + s * std::min(v, 0.0); },
                    [](double v, double s) { return s + static_cast<double>(v > 0.0) * (1.0 - s); },
                    [](double v, double) { return std::min(v, 0.0); }});
}

Tensor neg(const Tensor& a) {
  return unary_op("neg", a,
                  UnaryRule{[](double x, double) { return -x; }, [](double, double, double) { return -1.0; }});
}

Tensor abs(const Tensor& a) {
  return unary_op("abs", a,
                  UnaryRule{[](double x, double) { return std::abs(x); },
                   [](double x, double, double) { return sign(x); }});
}

Tensor square(const Tensor& a) {
  return unary_op("square", a,
                  UnaryRule{[](double x, double) { return x * x; },
                   [](double x, double, double) { return 2.0 * x; }});
}

Tensor pow(const Tensor& a, double k) {
  if (k == 2.0) return square(a);
  return unary_op("pow", a,
                  UnaryRule{[](double x, double p) { return std::pow(x, p); },
                   [](double x, double, double p) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); }},
                  k);
}

Tensor sqrt(const Tensor& a) {
  return unary_op("sqrt", a,
                  UnaryRule{[](double x, double) { return std::sqrt(x); },
                   [](double, double y, double) { return 0.5 / y; }});
}

Tensor log(const Tensor& a) {
  return unary_op("log", a,
                  UnaryRule{[](double x, double) { return std::log(x + kLogEpsilon); },
                   [](double x, double, double) { return 1.0 / (x + kLogEpsilon); }});
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a,
                  UnaryRule{[](double x, double) { return std::exp(x); },
                   [](double, double y, double) { return y; }});
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a,
                  UnaryRule{[](double x, double) { return 1.0 / (1.0 + std::exp(-x)); },
                   [](double, double y, double) { return y * (1.0 - y); }});
}

Tensor tanh(const Tensor& a) {
  return unary_op("tanh", a,
                  UnaryRule{[](double x, double) { return std::tanh(x); },
                   [](double, double y, double) { return 1.0 - y * y; }});
}

Tensor scale(const Tensor& a, double c) {
  return unary_op("scale", a,
                  UnaryRule{[](double x, double p) { return p * x; }, [](double, double, double p) { return p; }},
                  c);
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary_op("add_scalar", a,
                  UnaryRule{[](double x, double p) { return x + p; }, [](double, double, double) { return 1.0; }},
                  c);
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary_op("clamp_min", a,
                  UnaryRule{[](double x, double p) { return std::max(x, p); },
                   [](double x, double, double p) { return x > p ? 1.0 : 0.0; }},
                  floor);
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return clamp_min(scale(clamp_min(scale(a, -1.0), -hi), -1.0), lo);
}

}  // namespace atkl
