#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "atkl/tensor.hpp"

namespace atkl::detail {

using NodePtr = std::shared_ptr<Node>;

inline Node& node_of(const Tensor& t) {
  if (!t.defined()) throw UsageError("operation on undefined tensor");
  return *t.node();
}

/// Builds the result node. History is kept only when grad mode is on and at
/// least one input requires a gradient. Non-finite results raise NumericError.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<NodePtr> inputs, std::function<void(Node&)> backward);

inline bool wants_grad(const NodePtr& n) { return n->requires_grad; }

}  // namespace atkl::detail
