#include <algorithm>
#include <numeric>

#include "internal.hpp"

namespace atkl {

using detail::Node;

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  std::vector<detail::NodePtr> inputs;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: " + shape_str(s) + " incompatible with " + shape_str(first) +
                       " along axis " + std::to_string(axis));
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
    inputs.push_back(p.node());
  }
  const std::size_t total = out_shape[axis];
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    const std::size_t block = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(v.data() + o * block, block, out.data() + (o * total + offset) * inner);
    }
    offset += extents[k];
  }
  return detail::make_result("concat", out_shape, std::move(out), std::move(inputs),
                             [extents, outer, inner, total](Node& self) {
                               std::size_t offset = 0;
                               for (std::size_t k = 0; k < extents.size(); ++k) {
                                 Node& in = *self.inputs[k];
                                 const std::size_t block = extents[k] * inner;
                                 if (in.requires_grad) {
                                   auto gi = in.grad_buffer();
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     const double* src =
                                         self.grad.data() + (o * total + offset) * inner;
                                     double* dst = gi.data() + o * block;
                                     for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                                   }
                                 }
                                 offset += extents[k];
                               }
                             });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin >= end || end > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t extent = s[axis];
  const std::size_t len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  auto v = a.values();
  std::vector<double> out(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(v.data() + (o * extent + begin) * inner, len * inner, out.data() + o * len * inner);
  }
  return detail::make_result("slice", out_shape, std::move(out), {a.node()},
                             [outer, inner, extent, begin, len](Node& self) {
                               auto gi = self.inputs[0]->grad_buffer();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 const double* src = self.grad.data() + o * len * inner;
                                 double* dst = gi.data() + (o * extent + begin) * inner;
                                 for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  auto v = a.values();
  return detail::make_result("reshape", std::move(shape), std::vector<double>(v.begin(), v.end()),
                             {a.node()}, [](Node& self) {
                               auto gi = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
                             });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto v = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  }
  return detail::make_result("transpose", {c, r}, std::move(out), {a.node()}, [r, c](Node& self) {
    auto gi = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gi[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor frame(const Tensor& wave, std::size_t frame_len, std::size_t hop) {
  if (wave.rank() != 1) throw ShapeError("frame: expected rank 1, got " + shape_str(wave.shape()));
  const std::size_t len = wave.dim(0);
  if (frame_len == 0 || hop == 0 || len < frame_len) {
    throw ShapeError("frame: length " + std::to_string(len) + " shorter than frame " +
                     std::to_string(frame_len));
  }
  const std::size_t frames = 1 + (len - frame_len) / hop;
  auto v = wave.values();
  std::vector<double> out(frames * frame_len);
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy_n(v.data() + t * hop, frame_len, out.data() + t * frame_len);
  }
  return detail::make_result("frame", {frames, frame_len}, std::move(out), {wave.node()},
                             [frames, frame_len, hop](Node& self) {
                               auto gi = self.inputs[0]->grad_buffer();
                               for (std::size_t t = 0; t < frames; ++t) {
                                 for (std::size_t n = 0; n < frame_len; ++n) {
                                   gi[t * hop + n] += self.grad[t * frame_len + n];
                                 }
                               }
                             });
}

Tensor overlap_add(const Tensor& frames, std::size_t hop, std::size_t length) {
  if (frames.rank() != 2) {
    throw ShapeError("overlap_add: expected rank 2, got " + shape_str(frames.shape()));
  }
  const std::size_t count = frames.dim(0), frame_len = frames.dim(1);
  if (hop == 0) throw ShapeError("overlap_add: zero hop");
  auto v = frames.values();
  std::vector<double> out(length, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t n = 0; n < frame_len && t * hop + n < length; ++n) {
      out[t * hop + n] += v[t * frame_len + n];
    }
  }
  return detail::make_result("overlap_add", {length}, std::move(out), {frames.node()},
                             [count, frame_len, hop, length](Node& self) {
                               auto gi = self.inputs[0]->grad_buffer();
                               for (std::size_t t = 0; t < count; ++t) {
                                 for (std::size_t n = 0; n < frame_len && t * hop + n < length; ++n) {
                                   gi[t * frame_len + n] += self.grad[t * hop + n];
                                 }
                               }
                             });
}

}  // namespace atkl
