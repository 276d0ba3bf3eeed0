#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "atkl/distill.hpp"
#include "atkl/errors.hpp"
#include "atkl/seed.hpp"

namespace atkl::distill {

void OptimConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("optim: lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("optim: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("optim: eps must be positive");
  if (batch == 0) throw ConfigError("optim: batch must be positive");
  if (eval_every == 0) throw ConfigError("optim: eval_every must be positive");
}

Adam::Adam(nn::ParameterList params, const OptimConfig& cfg)
    : params_(std::move(params)), lr_(cfg.lr), beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.eps) {
  cfg.validate();
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].second;
    // Parameters that never saw a gradient keep zero moments and stay put.
    if (!t.has_grad()) continue;
    const auto g = t.grad();
    const auto w = t.mutable_values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

bool PlateauHalving::observe(double val_loss) {
  rises_ = last_ && val_loss > *last_ ? rises_ + 1 : 0;
  last_ = val_loss;
  if (rises_ < 2) return false;
  rises_ = 0;
  return true;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "step,loss_kd,loss_mix,loss_at,loss_atkl,val_sisnr_db,lr\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss_kd, r.loss_mix,
                  r.loss_at, r.loss_atkl, r.val_sisnr_db, r.lr);
    out += buf;
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  const std::string csv = metrics_csv(rows);
  if (!os || !os.write(csv.data(), static_cast<std::streamsize>(csv.size()))) {
    throw IoError("metrics: cannot write " + path.string());
  }
}

double mean_sisnr(const Model& model, const std::vector<data::Clip>& clips) {
  if (clips.empty()) throw UsageError("mean_sisnr: no clips");
  NoGradGuard guard;
  double total = 0.0;
  for (const auto& c : clips) total += si_snr(model.enhance(c.noisy), c.clean).item();
  return total / static_cast<double>(clips.size());
}

namespace {

using ExampleLoss = std::function<KdTerms(std::size_t train_index)>;

// Shared optimization loop. Each batch item is backpropagated on its own with
// weight 1 / batch, so gradients accumulate to the batch mean without holding
// every item's graph at once.
TrainResult optimize(Model& model, const data::Dataset& dataset, const OptimConfig& opt, const ExampleLoss& loss,
                     const ProgressFn& progress) {
  opt.validate();
  if (dataset.train.empty()) throw UsageError("training: dataset has no training clips");
  // Tiny datasets may have no validation split; fall back to the training clips.
  const auto& val = dataset.val.empty() ? dataset.train : dataset.val;

  model.set_trainable(true);
  const auto& params = model.parameters();
  Adam adam(params, opt);
  PlateauHalving plateau;
  std::vector<bool> touched(params.size(), false);

  std::mt19937_64 rng(derive_seed(opt.seed, "batch"));
  std::vector<std::size_t> order(dataset.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  TrainResult result;
  double sum_kd = 0.0, sum_mix = 0.0, sum_at = 0.0, sum_atkl = 0.0;
  std::size_t window = 0;

  auto evaluate = [&](std::size_t step) {
    MetricsRow row;
    row.step = step;
    const double n = window > 0 ? static_cast<double>(window) : 1.0;
    row.loss_kd = sum_kd / n;
    row.loss_mix = sum_mix / n;
    row.loss_at = sum_at / n;
    row.loss_atkl = sum_atkl / n;
    row.lr = adam.lr();
    row.val_sisnr_db = mean_sisnr(model, val);
    sum_kd = sum_mix = sum_at = sum_atkl = 0.0;
    window = 0;
    result.metrics.push_back(row);
    result.final_val_sisnr_db = row.val_sisnr_db;
    if (progress) progress(row);
    if (plateau.observe(-row.val_sisnr_db)) adam.set_lr(adam.lr() * 0.5);
  };

  const double weight = 1.0 / static_cast<double>(opt.batch);
  for (std::size_t step = 1; step <= opt.steps; ++step) {
    adam.zero_grad();
    double kd = 0.0, mix = 0.0, at = 0.0, atkl = 0.0;
    try {
      for (std::size_t b = 0; b < opt.batch; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        const KdTerms terms = loss(order[cursor++]);
        const double value = terms.total.item();
        if (!std::isfinite(value)) throw TrainingError(step, "loss is not finite");
        backward(scale(terms.total, weight));
        kd += weight * value;
        mix += weight * terms.mix.item();
        at += weight * terms.at.item();
        atkl += weight * terms.atkl.item();
      }
    } catch (const NumericError& e) {
      throw TrainingError(step, e.what());
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (touched[p] || !params[p].second.has_grad()) continue;
      const auto g = params[p].second.grad();
      touched[p] = std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
    }
    adam.step();
    sum_kd += kd;
    sum_mix += mix;
    sum_at += at;
    sum_atkl += atkl;
    ++window;
    if (step % opt.eval_every == 0 || step == opt.steps) evaluate(step);
  }
  if (opt.steps == 0) evaluate(0);
  adam.zero_grad();

  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!touched[p]) result.never_updated.push_back(params[p].first);
  }
  return result;
}

}  // namespace

TrainResult train_supervised(Model& model, const data::Dataset& dataset, const OptimConfig& opt,
                             const ProgressFn& progress) {
  const ExampleLoss loss = [&](std::size_t i) {
    const auto& clip = dataset.train[i];
    KdTerms t;
    t.mix = neg(si_snr(model.enhance(clip.noisy), clip.clean));
    t.at = Tensor::scalar(0.0);
    t.atkl = Tensor::scalar(0.0);
    t.total = t.mix;
    return t;
  };
  return optimize(model, dataset, opt, loss, progress);
}

TrainResult run_distillation(const Model& teacher, Model& student, const data::Dataset& dataset,
                             const DistillConfig& cfg, const OptimConfig& opt, Mode mode,
                             const ProgressFn& progress) {
  cfg.validate();
  const auto pairing = positional_pairing(teacher.config(), student.config());

  // The teacher is frozen, so its targets depend on the clip alone: compute
  // each clip's targets once, without recording a graph.
  std::vector<std::optional<TeacherTargets>> cache(dataset.train.size());
  const ExampleLoss loss = [&](std::size_t i) {
    const auto& clip = dataset.train[i];
    if (!cache[i]) {
      NoGradGuard guard;
      cache[i] = teacher_targets(teacher.forward_tapped(clip.noisy), pairing, cfg.lambda);
    }
    return kd_terms(*cache[i], student.forward_tapped(clip.noisy), clip.clean, pairing, cfg, mode);
  };
  return optimize(student, dataset, opt, loss, progress);
}

}  // namespace atkl::distill
