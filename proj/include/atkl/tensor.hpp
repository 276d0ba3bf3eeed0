#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "atkl/errors.hpp"

namespace atkl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  // Lazily allocated, zero-initialized gradient buffer.
  std::span<double> grad_buffer();
};

}  // namespace detail

/// Dense row-major array of doubles with reverse-mode gradient support.
///
/// Tensors are cheap handles to a shared node. Values are immutable once an
/// op has produced them; only leaves may be edited in place (parameter
/// updates, initialization, finite-difference probing).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> values() const;
  /// Leaf-only mutable access.
  std::span<double> mutable_values();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);
  void zero_grad();

  double item() const;
  double operator[](std::size_t flat) const { return values()[flat]; }

  /// New leaf sharing no history, with a copy of the values.
  Tensor detach() const;
  const char* op_name() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Topologically ordered record of the operations reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  std::vector<std::string> op_names() const;
  /// Seeds the root gradient with 1 and visits every node once, in reverse.
  void replay_backward();

 private:
  std::vector<detail::Node*> nodes_;  // inputs before consumers
  std::shared_ptr<detail::Node> root_;
};

/// Accumulates d(loss)/d(leaf) into every grad-enabled leaf reachable from
/// `loss`. Repeated calls accumulate.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops accept equal shapes, or one operand whose
// shape matches the other's trailing dimensions with optional size-1 axes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
/// Parametric ReLU; `slope` broadcasts against `x`.
Tensor prelu(const Tensor& x, const Tensor& slope);

Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
/// a^k; non-integer k requires a >= 0.
Tensor pow(const Tensor& a, double k);
Tensor sqrt(const Tensor& a);
/// log(a + 1e-12).
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
/// max(a, floor); gradient passes only where a > floor.
Tensor clamp_min(const Tensor& a, double floor);
Tensor clamp(const Tensor& a, double lo, double hi);

inline constexpr double kLogEpsilon = 1e-12;
inline constexpr double kNormFloor = 1e-12;

// ---------------------------------------------------------------------------
// Reductions.

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, std::size_t axis, bool keepdim = false);
/// sqrt(sum of squares) over all elements; gradient is zero at the origin.
Tensor l2_norm(const Tensor& a);
Tensor l2_norm(const Tensor& a, std::size_t axis, bool keepdim = false);
Tensor cumsum(const Tensor& a, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);

// ---------------------------------------------------------------------------
// Linear algebra and convolution.

Tensor matmul(const Tensor& a, const Tensor& b);

struct Conv2dGeometry {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_top = 0;
  std::size_t pad_bottom = 0;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  static Conv2dGeometry symmetric(std::size_t sh, std::size_t sw, std::size_t ph,
                                  std::size_t pw) {
    return {sh, sw, ph, ph, pw, pw};
  }
};

/// x: (Cin, H, W), w: (Cout, Cin, kh, kw) -> (Cout, H', W'), zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dGeometry& geo);
/// Adjoint of conv2d with respect to its input. x: (A, H, W), w: (A, B, kh, kw)
/// -> (B, (H-1)*sh + kh - pad_top - pad_bottom, ...). Padding crops output.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Conv2dGeometry& geo);

// ---------------------------------------------------------------------------
// Structural ops.

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
/// 2-D transpose.
Tensor transpose(const Tensor& a);
/// wave: (L) -> (T, frame_len) with T = 1 + (L - frame_len) / hop.
Tensor frame(const Tensor& wave, std::size_t frame_len, std::size_t hop);
/// Adjoint of frame: frames (T, frame_len) summed into a length-`length` signal.
Tensor overlap_add(const Tensor& frames, std::size_t hop, std::size_t length);

}  // namespace atkl
