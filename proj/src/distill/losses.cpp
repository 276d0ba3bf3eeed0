#include <cmath>
#include <numbers>

#include "atkl/distill.hpp"
#include "atkl/errors.hpp"

namespace atkl::distill {

namespace {

// |x|^lambda; lambda = 2 avoids the abs and the generic power.
Tensor abs_pow(const Tensor& x, double lambda) {
  return lambda == 2.0 ? square(x) : pow(abs(x), lambda);
}

Tensor unit_normalize(const Tensor& x) { return div(x, clamp_min(l2_norm(x), kNormFloor)); }

const Tensor& channel_map(const CompressedMap& m, const char* side) {
  if (!m.channel_compressed) {
    throw UsageError(std::string("mismatched pair without a channel map on the ") + side + " side");
  }
  return *m.channel_compressed;
}

void require_aligned(const std::vector<CompressedMap>& teacher, const std::vector<CompressedMap>& student,
                     const std::vector<LayerPairing>& pairing) {
  if (teacher.size() != pairing.size() || student.size() != pairing.size()) {
    throw UsageError("map lists must align with the pairing");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::size_t pair) {
  if (a.shape() != b.shape()) {
    throw ShapeError("pair " + std::to_string(pair) + ": teacher map " + shape_str(a.shape()) +
                     " vs student map " + shape_str(b.shape()));
  }
}

// KL(p || q) along the last axis of two distributions, averaged over any
// leading axis.
Tensor kl_rows(const Tensor& p, const Tensor& q) {
  Tensor terms = mul(p, sub(log(p), log(q)));
  if (p.rank() == 1) return sum(terms);
  return mean(sum(terms, p.rank() - 1));
}

}  // namespace

Tensor time_at(const Tensor& x, double lambda) {
  if (x.rank() != 3) throw ShapeError("time_at: expected (N, F, T), got " + shape_str(x.shape()));
  return unit_normalize(sum(abs_pow(x, lambda), 2));
}

Tensor channel_at(const Tensor& y, double lambda) {
  if (y.rank() != 2) throw ShapeError("channel_at: expected (N, F), got " + shape_str(y.shape()));
  return unit_normalize(sum(abs_pow(y, lambda), 0));
}

CompressedMap compress_tap(const Tensor& tap, bool channel_mismatch, double lambda) {
  CompressedMap out{time_at(tap, lambda), std::nullopt};
  if (channel_mismatch) out.channel_compressed = channel_at(out.time_compressed, lambda);
  return out;
}

std::vector<Tensor> flatten_taps(const TappedForward& f) {
  std::vector<Tensor> taps(f.enc_taps);
  taps.insert(taps.end(), f.dec_taps.begin(), f.dec_taps.end());
  return taps;
}

std::vector<LayerPairing> positional_pairing(const ModelConfig& teacher, const ModelConfig& student) {
  require_compatible(teacher.stft, student.stft);
  if (teacher.enc_channels.size() != student.enc_channels.size()) {
    throw ConfigError("pairing: teacher has " + std::to_string(teacher.enc_channels.size()) +
                      " encoder layers, student " + std::to_string(student.enc_channels.size()));
  }
  const auto tc = teacher.tap_channels(), sc = student.tap_channels();
  const auto tf = teacher.tap_freqs(), sf = student.tap_freqs();
  const std::size_t layers = teacher.enc_channels.size();
  std::vector<LayerPairing> out;
  for (std::size_t i = 0; i < tc.size(); ++i) {
    if (tf[i] != sf[i]) {
      throw ConfigError("pairing: frequency extents differ at tap " + std::to_string(i) + " (" +
                        std::to_string(tf[i]) + " vs " + std::to_string(sf[i]) + ")");
    }
    out.push_back({i, i, tc[i] != sc[i], i >= layers});
  }
  return out;
}

Tensor at_loss(const std::vector<CompressedMap>& teacher, const std::vector<CompressedMap>& student,
               const std::vector<LayerPairing>& pairing) {
  require_aligned(teacher, student, pairing);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < pairing.size(); ++i) {
    const Tensor& t = pairing[i].channel_mismatch ? channel_map(teacher[i], "teacher")
                                                  : teacher[i].time_compressed;
    const Tensor& s = pairing[i].channel_mismatch ? channel_map(student[i], "student")
                                                  : student[i].time_compressed;
    require_same_shape(t, s, i);
    total = add(total, l2_norm(sub(t.detach(), s)));
  }
  return total;
}

Tensor atkl_loss(const std::vector<CompressedMap>& teacher, const std::vector<CompressedMap>& student,
                 const std::vector<LayerPairing>& pairing, KlDirection direction) {
  require_aligned(teacher, student, pairing);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < pairing.size(); ++i) {
    const Tensor& t = pairing[i].channel_mismatch ? channel_map(teacher[i], "teacher")
                                                  : teacher[i].time_compressed;
    const Tensor& s = pairing[i].channel_mismatch ? channel_map(student[i], "student")
                                                  : student[i].time_compressed;
    require_same_shape(t, s, i);
    const std::size_t freq_axis = s.rank() - 1;
    const Tensor q_teacher = softmax(t.detach(), freq_axis);
    const Tensor p_student = softmax(s, freq_axis);
    total = add(total, direction == KlDirection::student_to_teacher ? kl_rows(p_student, q_teacher)
                                                                    : kl_rows(q_teacher, p_student));
  }
  return total;
}

Tensor si_snr(const Tensor& est, const Tensor& ref) {
  if (est.rank() != 1 || est.shape() != ref.shape()) {
    throw ShapeError("si_snr: expected equal 1-D signals, got " + shape_str(est.shape()) + " and " +
                     shape_str(ref.shape()));
  }
  const Tensor r = sub(ref, mean(ref));
  const double ref_energy = [&] {
    double e = 0.0;
    for (double v : r.values()) e += v * v;
    return e;
  }();
  if (!(ref_energy > 0.0)) throw DegenerateReferenceError("si_snr: reference has no energy after mean removal");

  const Tensor e = sub(est, mean(est));
  const Tensor target = mul(div(sum(mul(e, r)), sum(square(r))), r);
  const Tensor residual = sub(e, target);
  const Tensor ratio = div(sum(square(target)), clamp_min(sum(square(residual)), 1e-12));
  const Tensor db = scale(log(ratio), 10.0 / std::numbers::ln10);
  return clamp(db, -kSiSnrClampDb, kSiSnrClampDb);
}

Tensor si_snr_mix_loss(const Tensor& student_out, const Tensor& clean, const Tensor& teacher_out, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (alpha == 1.0) return neg(si_snr(student_out, clean));
  const Tensor soft = neg(si_snr(student_out, teacher_out.detach()));
  if (alpha == 0.0) return soft;
  return add(scale(neg(si_snr(student_out, clean)), alpha), scale(soft, 1.0 - alpha));
}

Tensor kd_loss(const Tensor& mix, const Tensor& at, const Tensor& atkl, const LossWeights& w) {
  return add(add(scale(mix, w.beta), scale(at, w.gamma)), scale(atkl, w.eta));
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::output_only: return "output_only";
    case Mode::at: return "at";
    case Mode::kl_enc: return "kl_enc";
    case Mode::kl_dec: return "kl_dec";
    case Mode::kl_all: return "kl_all";
    case Mode::at_kl: return "at_kl";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::output_only, Mode::at, Mode::kl_enc, Mode::kl_dec, Mode::kl_all, Mode::at_kl}) {
    if (to_string(m) == s) return m;
  }
  throw UsageError("unknown mode '" + s + "' (output_only, at, kl_enc, kl_dec, kl_all, at_kl)");
}

void DistillConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("distill: alpha must lie in [0, 1]");
  if (!(weights.beta >= 0.0 && weights.gamma >= 0.0 && weights.eta >= 0.0)) {
    throw ConfigError("distill: loss weights must be non-negative");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("distill: lambda must be positive");
}

TeacherTargets teacher_targets(const TappedForward& teacher, const std::vector<LayerPairing>& pairing,
                               double lambda) {
  const auto taps = flatten_taps(teacher);
  TeacherTargets out{teacher.enhanced.detach(), {}};
  for (const auto& p : pairing) {
    if (p.teacher_tap >= taps.size()) throw UsageError("pairing: teacher tap index out of range");
    CompressedMap m = compress_tap(taps[p.teacher_tap].detach(), p.channel_mismatch, lambda);
    m.time_compressed = m.time_compressed.detach();
    if (m.channel_compressed) m.channel_compressed = m.channel_compressed->detach();
    out.maps.push_back(std::move(m));
  }
  return out;
}

KdTerms kd_terms(const TeacherTargets& teacher, const TappedForward& student, const Tensor& clean,
                 const std::vector<LayerPairing>& pairing, const DistillConfig& cfg, Mode mode) {
  const bool use_at = mode == Mode::at || mode == Mode::at_kl;
  const bool kl_enc = mode == Mode::kl_enc || mode == Mode::kl_all || mode == Mode::at_kl;
  const bool kl_dec = mode == Mode::kl_dec || mode == Mode::kl_all || mode == Mode::at_kl;

  KdTerms out;
  out.mix = si_snr_mix_loss(student.enhanced, clean, teacher.enhanced, cfg.alpha);
  out.at = Tensor::scalar(0.0);
  out.atkl = Tensor::scalar(0.0);
  if (use_at || kl_enc || kl_dec) {
    if (teacher.maps.size() != pairing.size()) throw UsageError("teacher targets do not match the pairing");
    const auto taps = flatten_taps(student);
    std::vector<CompressedMap> s_maps, t_kl, s_kl;
    std::vector<LayerPairing> kl_pairs;
    for (std::size_t i = 0; i < pairing.size(); ++i) {
      if (pairing[i].student_tap >= taps.size()) throw UsageError("pairing: student tap index out of range");
      s_maps.push_back(compress_tap(taps[pairing[i].student_tap], pairing[i].channel_mismatch, cfg.lambda));
      if (pairing[i].decoder ? kl_dec : kl_enc) {
        t_kl.push_back(teacher.maps[i]);
        s_kl.push_back(s_maps.back());
        kl_pairs.push_back(pairing[i]);
      }
    }
    if (use_at) out.at = at_loss(teacher.maps, s_maps, pairing);
    if (!kl_pairs.empty()) out.atkl = atkl_loss(t_kl, s_kl, kl_pairs, cfg.kl_direction);
  }
  out.total = kd_loss(out.mix, out.at, out.atkl, cfg.weights);
  return out;
}

}  // namespace atkl::distill
