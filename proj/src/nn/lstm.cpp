#include <cmath>

#include <Eigen/Core>

#include "../tensor/internal.hpp"
#include "atkl/nn.hpp"

namespace atkl::nn {

namespace {

using Index = Eigen::Index;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> cmap(std::span<const double> v, Index rows, Index cols) {
  return {v.data(), rows, cols};
}
Eigen::Map<RowMat> mmap(std::span<double> v, Index rows, Index cols) { return {v.data(), rows, cols}; }
Eigen::Map<const Eigen::VectorXd> cvec(std::span<const double> v) {
  return {v.data(), static_cast<Index>(v.size())};
}

double sigmoid_of(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

LstmLayer::LstmLayer(std::size_t input, std::size_t hidden, std::mt19937_64& rng)
    : w_ih(uniform_parameter({input, 4 * hidden}, hidden, rng)),
      w_hh(uniform_parameter({hidden, 4 * hidden}, hidden, rng)),
      hidden_(hidden) {
  std::vector<double> b(4 * hidden, 0.0);
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden), 1.0);
  bias = Tensor({4 * hidden}, std::move(b));
  bias.set_requires_grad();
}

Tensor LstmLayer::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != w_ih.dim(0)) {
    throw ShapeError("lstm: expected (T, " + std::to_string(w_ih.dim(0)) + ") input, got " +
                     shape_str(x.shape()));
  }
  const Index steps = static_cast<Index>(x.dim(0)), d = static_cast<Index>(x.dim(1));
  const Index h = static_cast<Index>(hidden_);

  // Cache: gate activations (T, 4H) in order i, f, g, o, cell states (T+1, H)
  // with a zero initial row, and the outputs themselves.
  auto gates = std::make_shared<RowMat>(cmap(x.values(), steps, d) * cmap(w_ih.values(), d, 4 * h));
  gates->rowwise() += cvec(bias.values()).transpose();
  auto cells = std::make_shared<RowMat>(RowMat::Zero(steps + 1, h));
  RowMat out(steps, h);
  const auto w_hh_m = cmap(w_hh.values(), h, 4 * h);
  Eigen::RowVectorXd prev = Eigen::RowVectorXd::Zero(h);
  for (Index t = 0; t < steps; ++t) {
    auto z = gates->row(t);
    z.noalias() += prev * w_hh_m;
    for (Index k = 0; k < h; ++k) {
      const double ig = sigmoid_of(z[k]), fg = sigmoid_of(z[h + k]);
      const double gg = std::tanh(z[2 * h + k]), og = sigmoid_of(z[3 * h + k]);
      z[k] = ig;
      z[h + k] = fg;
      z[2 * h + k] = gg;
      z[3 * h + k] = og;
      const double cell = fg * (*cells)(t, k) + ig * gg;
      (*cells)(t + 1, k) = cell;
      out(t, k) = og * std::tanh(cell);
    }
    prev = out.row(t);
  }

  std::vector<double> values(out.data(), out.data() + out.size());
  return detail::make_result(
      "lstm", {x.dim(0), hidden_}, std::move(values),
      {x.node(), w_ih.node(), w_hh.node(), bias.node()},
      [steps, d, h, gates, cells](detail::Node& self) {
        detail::Node& nx = *self.inputs[0];
        detail::Node& nih = *self.inputs[1];
        detail::Node& nhh = *self.inputs[2];
        detail::Node& nb = *self.inputs[3];
        const auto g_out = cmap(self.grad, steps, h);
        const auto y = cmap(self.value, steps, h);
        const auto w_hh_m = cmap(nhh.value, h, 4 * h);
        RowMat dz(steps, 4 * h);
        Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
        Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
        for (Index t = steps; t-- > 0;) {
          for (Index k = 0; k < h; ++k) {
            const double ig = (*gates)(t, k), fg = (*gates)(t, h + k);
            const double gg = (*gates)(t, 2 * h + k), og = (*gates)(t, 3 * h + k);
            const double tc = std::tanh((*cells)(t + 1, k));
            const double dh = g_out(t, k) + dh_next[k];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
            dz(t, k) = dc * gg * ig * (1.0 - ig);
            dz(t, h + k) = dc * (*cells)(t, k) * fg * (1.0 - fg);
            dz(t, 2 * h + k) = dc * ig * (1.0 - gg * gg);
            dz(t, 3 * h + k) = dh * tc * og * (1.0 - og);
            dc_next[k] = dc * fg;
          }
          dh_next.noalias() = dz.row(t) * w_hh_m.transpose();
        }
        if (nhh.requires_grad && steps > 1) {
          // h_{t-1} for t >= 1 pairs with dz row t.
          mmap(nhh.grad_buffer(), h, 4 * h).noalias() +=
              y.topRows(steps - 1).transpose() * dz.bottomRows(steps - 1);
        }
        if (nih.requires_grad) {
          mmap(nih.grad_buffer(), d, 4 * h).noalias() += cmap(nx.value, steps, d).transpose() * dz;
        }
        if (nb.requires_grad) {
          auto buf = nb.grad_buffer();
          const Eigen::RowVectorXd col_sum = dz.colwise().sum();
          for (Index k = 0; k < 4 * h; ++k) buf[static_cast<std::size_t>(k)] += col_sum[k];
        }
        if (nx.requires_grad) {
          mmap(nx.grad_buffer(), steps, d).noalias() += dz * cmap(nih.value, d, 4 * h).transpose();
        }
      });
}

void LstmLayer::collect(const std::string& prefix, ParameterList& out) const {
  out.emplace_back(prefix + ".w_ih", w_ih);
  out.emplace_back(prefix + ".w_hh", w_hh);
  out.emplace_back(prefix + ".bias", bias);
}

LstmStack::LstmStack(std::size_t input, std::size_t hidden, std::size_t layers,
                     std::mt19937_64& rng) {
  for (std::size_t i = 0; i < layers; ++i) layers_.emplace_back(i == 0 ? input : hidden, hidden, rng);
}

Tensor LstmStack::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

void LstmStack::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + "." + std::to_string(i), out);
  }
}

}  // namespace atkl::nn
