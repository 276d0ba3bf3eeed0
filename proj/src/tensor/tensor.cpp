#include "atkl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "internal.hpp"

namespace atkl {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

std::span<double> detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor detail::make_result(const char* op, Shape shape, std::vector<double> value,
                           std::vector<NodePtr> inputs,
                           std::function<void(Node&)> backward) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(op, "non-finite value produced");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled &&
      std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& n) { return n->requires_grad; })) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::Node>()) {
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

const Shape& Tensor::shape() const { return detail::node_of(*this).shape; }
std::size_t Tensor::numel() const { return detail::node_of(*this).value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::span<const double> Tensor::values() const { return detail::node_of(*this).value; }

std::span<double> Tensor::mutable_values() {
  auto& n = detail::node_of(*this);
  if (!n.is_leaf()) throw UsageError("mutable_values: tensor is not a leaf");
  return n.value;
}

std::span<const double> Tensor::grad() const { return detail::node_of(*this).grad; }
std::span<double> Tensor::mutable_grad() { return detail::node_of(*this).grad_buffer(); }
bool Tensor::has_grad() const { return !detail::node_of(*this).grad.empty(); }

bool Tensor::requires_grad() const { return detail::node_of(*this).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  auto& n = detail::node_of(*this);
  if (!n.is_leaf()) throw UsageError("set_requires_grad: tensor is not a leaf");
  n.requires_grad = on;
  return *this;
}

void Tensor::zero_grad() {
  auto& g = detail::node_of(*this).grad;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item: tensor has " + std::to_string(numel()) + " elements");
  return values()[0];
}

Tensor Tensor::detach() const {
  const auto& n = detail::node_of(*this);
  return Tensor(n.shape, n.value);
}

const char* Tensor::op_name() const { return detail::node_of(*this).op; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tape Tape::record(const Tensor& root) {
  Tape tape;
  tape.root_ = root.node();
  if (!tape.root_ || !tape.root_->requires_grad) return tape;

  // Iterative post-order DFS so deep LSTM unrolls do not exhaust the stack.
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(tape.root_.get(), 0);
  visited.insert(tape.root_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (auto* n : nodes_) names.emplace_back(n->op);
  return names;
}

void Tape::replay_backward() {
  if (nodes_.empty()) return;
  // Intermediate gradients are per-pass; leaves accumulate across passes.
  for (auto* n : nodes_) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  auto g = root_->grad_buffer();
  for (auto& v : g) v += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node* n = *it;
    if (n->is_leaf() || n->grad.empty()) continue;
    n->backward(*n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  Tape::record(loss).replay_backward();
}

}  // namespace atkl
