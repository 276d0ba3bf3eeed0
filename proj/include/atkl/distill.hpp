#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atkl/data.hpp"
#include "atkl/models.hpp"
#include "atkl/tensor.hpp"

namespace atkl::distill {

/// Attention transfer over time: sum_t |X(:,:,t)|^lambda, l2-normalized with a
/// 1e-12 floor on the norm. (N, F, T) -> (N, F).
Tensor time_at(const Tensor& x, double lambda = 2.0);

/// Attention transfer over channels: sum_n |Y(n,:)|^lambda, l2-normalized.
/// (N, F) -> (F).
Tensor channel_at(const Tensor& y, double lambda = 2.0);

struct CompressedMap {
  Tensor time_compressed;                    // (N, F)
  std::optional<Tensor> channel_compressed;  // (F), mismatched pairs only
};

CompressedMap compress_tap(const Tensor& tap, bool channel_mismatch, double lambda = 2.0);

/// Indices into the flattened tap list (encoder taps, then decoder taps).
struct LayerPairing {
  std::size_t teacher_tap = 0;
  std::size_t student_tap = 0;
  bool channel_mismatch = false;
  bool decoder = false;

  bool operator==(const LayerPairing&) const = default;
};

/// Positional pairing over all encoder and decoder layers. Layer counts and
/// frequency extents must agree; channel mismatch is read off the configs.
std::vector<LayerPairing> positional_pairing(const ModelConfig& teacher, const ModelConfig& student);

std::vector<Tensor> flatten_taps(const TappedForward& f);

/// Sum over pairs of the unsquared Euclidean distance between maps: Z maps
/// for mismatched pairs, Y maps otherwise. Teacher maps are detached.
Tensor at_loss(const std::vector<CompressedMap>& teacher, const std::vector<CompressedMap>& student,
               const std::vector<LayerPairing>& pairing);

enum class KlDirection { student_to_teacher, teacher_to_student };

/// Sum over pairs of KL(p || q) between frequency softmaxes of the maps.
/// Matched pairs use Y maps per channel, averaged over channels; mismatched
/// pairs use Z maps. By default p is the student, q the teacher.
Tensor atkl_loss(const std::vector<CompressedMap>& teacher, const std::vector<CompressedMap>& student,
                 const std::vector<LayerPairing>& pairing,
                 KlDirection direction = KlDirection::student_to_teacher);

inline constexpr double kSiSnrClampDb = 60.0;

/// Scale-invariant SNR in dB of `est` against `ref`, clamped to +-60 dB.
Tensor si_snr(const Tensor& est, const Tensor& ref);

/// alpha * (-si_snr(student, clean)) + (1 - alpha) * (-si_snr(student, teacher)).
Tensor si_snr_mix_loss(const Tensor& student_out, const Tensor& clean, const Tensor& teacher_out,
                       double alpha);

struct LossWeights {
  double beta = 1.0;
  double gamma = 1.0;
  double eta = 60.0;

  bool operator==(const LossWeights&) const = default;
};

Tensor kd_loss(const Tensor& mix, const Tensor& at, const Tensor& atkl, const LossWeights& w);

enum class Mode { output_only, at, kl_enc, kl_dec, kl_all, at_kl };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& s);

struct DistillConfig {
  double lambda = 2.0;
  double alpha = 0.5;
  LossWeights weights;
  KlDirection kl_direction = KlDirection::student_to_teacher;

  void validate() const;
  bool operator==(const DistillConfig&) const = default;
};

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t steps = 2000;
  std::size_t batch = 4;
  std::size_t eval_every = 100;  // one "epoch" for the halving rule
  std::uint64_t seed = 0;        // batch order

  void validate() const;
  bool operator==(const OptimConfig&) const = default;
};

class Adam {
 public:
  Adam(nn::ParameterList params, const OptimConfig& cfg);

  /// Applies one update from the parameters' accumulated gradients.
  void step();
  void zero_grad();
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  std::size_t steps_taken() const { return t_; }

 private:
  nn::ParameterList params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Halves the learning rate after validation loss rose on two consecutive
/// evaluations.
class PlateauHalving {
 public:
  /// Returns true when the rate should be halved now.
  bool observe(double val_loss);

 private:
  std::optional<double> last_;
  int rises_ = 0;
};

struct MetricsRow {
  std::size_t step = 0;
  double loss_kd = 0.0;
  double loss_mix = 0.0;
  double loss_at = 0.0;
  double loss_atkl = 0.0;
  double val_sisnr_db = 0.0;
  double lr = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

struct TrainResult {
  std::vector<MetricsRow> metrics;
  double final_val_sisnr_db = 0.0;
  /// Parameter names that never received a nonzero gradient element.
  std::vector<std::string> never_updated;
};

using ProgressFn = std::function<void(const MetricsRow&)>;

/// Mean SI-SNR in dB of the model's output over the clips (no gradients).
double mean_sisnr(const Model& model, const std::vector<data::Clip>& clips);

/// Supervised training with the hard-label loss -si_snr(out, clean). Used for
/// teacher pretraining and for the directly trained student baseline.
TrainResult train_supervised(Model& model, const data::Dataset& dataset, const OptimConfig& opt,
                             const ProgressFn& progress = {});
inline TrainResult train_teacher(Model& teacher, const data::Dataset& dataset, const OptimConfig& opt,
                                 const ProgressFn& progress = {}) {
  return train_supervised(teacher, dataset, opt, progress);
}

/// Distills a frozen teacher into the student. The teacher is evaluated
/// without gradients and its parameters are never written.
TrainResult run_distillation(const Model& teacher, Model& student, const data::Dataset& dataset,
                             const DistillConfig& cfg, const OptimConfig& opt, Mode mode,
                             const ProgressFn& progress = {});

/// Detached teacher quantities the objective needs for one clip: the
/// enhanced waveform (soft label) and compressed maps for every pairing.
struct TeacherTargets {
  Tensor enhanced;
  std::vector<CompressedMap> maps;
};

TeacherTargets teacher_targets(const TappedForward& teacher, const std::vector<LayerPairing>& pairing,
                               double lambda);

/// Loss components of one distillation example, before batch averaging.
/// Components a mode does not use are zero scalars.
struct KdTerms {
  Tensor total, mix, at, atkl;
};

KdTerms kd_terms(const TeacherTargets& teacher, const TappedForward& student, const Tensor& clean,
                 const std::vector<LayerPairing>& pairing, const DistillConfig& cfg, Mode mode);

}  // namespace atkl::distill
