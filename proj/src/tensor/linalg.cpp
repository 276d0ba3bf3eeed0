// Matrix products and 2-D convolutions. Dense products are delegated to Eigen;
// convolutions are lowered to products via im2col.

#include <Eigen/Core>

#include "internal.hpp"

namespace atkl {

using detail::Node;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat cmap(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat mmap(std::span<double> v, std::size_t rows, std::size_t cols) {
  return MapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMapMat cmap(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return ConstMapMat(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Index relation shared by conv2d and conv_transpose2d: element (i, j) of the
// small grid with kernel offset (p, q) touches big-grid element
// (i*sh + p - pad_top, j*sw + q - pad_left).
struct Lowering {
  std::size_t channels, big_h, big_w, small_h, small_w, kh, kw;
  Conv2dGeometry geo;

  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return small_h * small_w; }

  // col[(c, p, q), (i, j)] = big[c, i*sh+p-pt, j*sw+q-pl]
  void gather(const double* big, double* col) const {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < kh; ++p) {
        for (std::size_t q = 0; q < kw; ++q) {
          double* dst = col + ((c * kh + p) * kw + q) * cols();
          for (std::size_t i = 0; i < small_h; ++i) {
            const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i * geo.stride_h + p) -
                                     static_cast<std::ptrdiff_t>(geo.pad_top);
            double* row = dst + i * small_w;
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(big_h)) {
              std::fill(row, row + small_w, 0.0);
              continue;
            }
            const double* src = big + (c * big_h + static_cast<std::size_t>(r)) * big_w;
            for (std::size_t j = 0; j < small_w; ++j) {
              const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j * geo.stride_w + q) -
                                       static_cast<std::ptrdiff_t>(geo.pad_left);
              row[j] = (s < 0 || s >= static_cast<std::ptrdiff_t>(big_w)) ? 0.0 : src[s];
            }
          }
        }
      }
    }
  }

  // Adjoint of gather: big += scatter(col).
  void scatter(const double* col, double* big) const {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < kh; ++p) {
        for (std::size_t q = 0; q < kw; ++q) {
          const double* src = col + ((c * kh + p) * kw + q) * cols();
          for (std::size_t i = 0; i < small_h; ++i) {
            const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(i * geo.stride_h + p) -
                                     static_cast<std::ptrdiff_t>(geo.pad_top);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(big_h)) continue;
            double* dst = big + (c * big_h + static_cast<std::size_t>(r)) * big_w;
            const double* row = src + i * small_w;
            for (std::size_t j = 0; j < small_w; ++j) {
              const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(j * geo.stride_w + q) -
                                       static_cast<std::ptrdiff_t>(geo.pad_left);
              if (s >= 0 && s < static_cast<std::ptrdiff_t>(big_w)) dst[s] += row[j];
            }
          }
        }
      }
    }
  }
};

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2, "lhs");
  require_rank("matmul", b, 2, "rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(m * p);
  mmap(out, m, p).noalias() = cmap(a.values(), m, k) * cmap(b.values(), k, p);
  return detail::make_result("matmul", {m, p}, std::move(out), {a.node(), b.node()},
                             [m, k, p](Node& self) {
                               Node& na = *self.inputs[0];
                               Node& nb = *self.inputs[1];
                               auto g = cmap(self.grad, m, p);
                               if (na.requires_grad) {
                                 mmap(na.grad_buffer(), m, k).noalias() +=
                                     g * cmap(nb.value, k, p).transpose();
                               }
                               if (nb.requires_grad) {
                                 mmap(nb.grad_buffer(), k, p).noalias() +=
                                     cmap(na.value, m, k).transpose() * g;
                               }
                             });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dGeometry& geo) {
  require_rank("conv2d", x, 3, "input");
  require_rank("conv2d", w, 4, "kernel");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()));
  }
  if (geo.stride_h == 0 || geo.stride_w == 0) throw ShapeError("conv2d: zero stride");
  if (h + geo.pad_top + geo.pad_bottom < kh || wd + geo.pad_left + geo.pad_right < kw) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  const std::size_t oh = (h + geo.pad_top + geo.pad_bottom - kh) / geo.stride_h + 1;
  const std::size_t ow = (wd + geo.pad_left + geo.pad_right - kw) / geo.stride_w + 1;
  const Lowering low{cin, h, wd, oh, ow, kh, kw, geo};

  auto col = std::make_shared<std::vector<double>>(low.rows() * low.cols());
  low.gather(x.values().data(), col->data());
  std::vector<double> out(cout * oh * ow);
  mmap(out, cout, low.cols()).noalias() =
      cmap(w.values(), cout, low.rows()) * cmap(*col, low.rows(), low.cols());

  return detail::make_result(
      "conv2d", {cout, oh, ow}, std::move(out), {x.node(), w.node()},
      [low, col, cout](Node& self) {
        Node& nx = *self.inputs[0];
        Node& nw = *self.inputs[1];
        auto g = cmap(self.grad, cout, low.cols());
        if (nw.requires_grad) {
          mmap(nw.grad_buffer(), cout, low.rows()).noalias() +=
              g * cmap(*col, low.rows(), low.cols()).transpose();
        }
        if (nx.requires_grad) {
          RowMat dcol = cmap(nw.value, cout, low.rows()).transpose() * g;
          low.scatter(dcol.data(), nx.grad_buffer().data());
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Conv2dGeometry& geo) {
  require_rank("conv_transpose2d", x, 3, "input");
  require_rank("conv_transpose2d", w, 4, "kernel");
  const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(0) != cin) {
    throw ShapeError("conv_transpose2d: kernel " + shape_str(w.shape()) +
                     " does not match input " + shape_str(x.shape()));
  }
  if (geo.stride_h == 0 || geo.stride_w == 0) throw ShapeError("conv_transpose2d: zero stride");
  const std::size_t full_h = (h - 1) * geo.stride_h + kh;
  const std::size_t full_w = (wd - 1) * geo.stride_w + kw;
  if (full_h <= geo.pad_top + geo.pad_bottom || full_w <= geo.pad_left + geo.pad_right) {
    throw ShapeError("conv_transpose2d: padding removes the whole output for input " +
                     shape_str(x.shape()));
  }
  const std::size_t oh = full_h - geo.pad_top - geo.pad_bottom;
  const std::size_t ow = full_w - geo.pad_left - geo.pad_right;
  const Lowering low{cout, oh, ow, h, wd, kh, kw, geo};

  RowMat col = cmap(w.values(), cin, low.rows()).transpose() * cmap(x.values(), cin, low.cols());
  std::vector<double> out(cout * oh * ow, 0.0);
  low.scatter(col.data(), out.data());

  return detail::make_result(
      "conv_transpose2d", {cout, oh, ow}, std::move(out), {x.node(), w.node()},
      [low, cin](Node& self) {
        Node& nx = *self.inputs[0];
        Node& nw = *self.inputs[1];
        std::vector<double> dcol(low.rows() * low.cols());
        low.gather(self.grad.data(), dcol.data());
        auto dc = cmap(dcol, low.rows(), low.cols());
        if (nx.requires_grad) {
          mmap(nx.grad_buffer(), cin, low.cols()).noalias() += cmap(nw.value, cin, low.rows()) * dc;
        }
        if (nw.requires_grad) {
          mmap(nw.grad_buffer(), cin, low.rows()).noalias() +=
              cmap(nx.value, cin, low.cols()) * dc.transpose();
        }
      });
}

}  // namespace atkl
