#include <algorithm>
#include <cstdio>

#include "atkl/errors.hpp"
#include "atkl/experiment.hpp"
#include "atkl/seed.hpp"

namespace atkl {

std::uint64_t init_seed(std::uint64_t run_seed) { return derive_seed(run_seed, "init"); }
std::uint64_t data_base_seed(std::uint64_t dataset_seed) { return derive_seed(dataset_seed, "data"); }

data::Dataset make_experiment_dataset(const DatasetConfig& cfg) {
  return data::make_dataset(cfg.clips, data_base_seed(cfg.seed), cfg.clip);
}

distill::OptimConfig run_optim(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  distill::OptimConfig opt = cfg.optim;
  opt.seed = run_seed;
  return opt;
}

double noisy_sisnr(const std::vector<data::Clip>& clips) {
  if (clips.empty()) throw UsageError("noisy_sisnr: no clips");
  double total = 0.0;
  for (const auto& c : clips) total += distill::si_snr(c.noisy, c.clean).item();
  return total / static_cast<double>(clips.size());
}

std::string arm_name(const Arm& arm) { return arm ? distill::to_string(*arm) : "direct"; }

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double AblationResult::median(const std::string& arm) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.arm == arm) v.push_back(r.val_sisnr_db);
  }
  if (v.empty()) throw UsageError("ablation: no runs for arm " + arm);
  return atkl::median(v);
}

double AblationResult::value(std::uint64_t seed, const std::string& arm) const {
  for (const auto& r : rows) {
    if (r.seed == seed && r.arm == arm) return r.val_sisnr_db;
  }
  throw UsageError("ablation: no run for arm " + arm + " seed " + std::to_string(seed));
}

AblationResult run_ablation(const ExperimentConfig& cfg, const data::Dataset& dataset,
                            const std::vector<distill::Mode>& modes, const LogFn& log) {
  cfg.validate();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  char buf[160];
  AblationResult result;
  result.noisy_val_sisnr_db = noisy_sisnr(dataset.val.empty() ? dataset.train : dataset.val);

  const std::uint64_t teacher_seed = cfg.seeds.front();
  Model teacher(cfg.teacher, init_seed(teacher_seed));
  result.teacher_val_sisnr_db = distill::train_teacher(teacher, dataset, run_optim(cfg, teacher_seed)).final_val_sisnr_db;
  teacher.set_trainable(false);
  std::snprintf(buf, sizeof buf, "teacher seed %llu: %.3f dB", static_cast<unsigned long long>(teacher_seed),
                result.teacher_val_sisnr_db);
  say(buf);

  std::vector<Arm> arms{std::nullopt};
  for (auto m : modes) arms.emplace_back(m);
  for (std::uint64_t seed : cfg.seeds) {
    const auto opt = run_optim(cfg, seed);
    for (const Arm& arm : arms) {
      Model student(cfg.student, init_seed(seed));
      const distill::TrainResult r = arm ? distill::run_distillation(teacher, student, dataset, cfg.distill, opt, *arm)
                                         : distill::train_supervised(student, dataset, opt);
      result.rows.push_back({seed, arm_name(arm), r.final_val_sisnr_db});
      std::snprintf(buf, sizeof buf, "seed %llu %s: %.3f dB", static_cast<unsigned long long>(seed),
                    arm_name(arm).c_str(), r.final_val_sisnr_db);
      say(buf);
    }
  }
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::string out = "seed,arm,val_sisnr_db\n";
  char buf[96];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%.17g\n", static_cast<unsigned long long>(r.seed), r.arm.c_str(),
                  r.val_sisnr_db);
    out += buf;
  }
  return out;
}

}  // namespace atkl
