#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atkl/config.hpp"

namespace atkl {

// Seed scheme. A run seed S expands into named streams with derive_seed:
//   "init"  model initialization (teacher and student alike)
//   "batch" batch order (inside the training loop)
// The dataset seed D gives base seed derive_seed(D, "data"); clip i then
// uses base + i and splits further into "mixture", "clean" and "noise".
std::uint64_t init_seed(std::uint64_t run_seed);
std::uint64_t data_base_seed(std::uint64_t dataset_seed);

data::Dataset make_experiment_dataset(const DatasetConfig& cfg);

/// Optimizer settings of one run: the config's, with the run seed.
distill::OptimConfig run_optim(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Mean SI-SNR of the unprocessed noisy clips against clean.
double noisy_sisnr(const std::vector<data::Clip>& clips);

/// Arm name of a student run: "direct" or a distillation mode name.
using Arm = std::optional<distill::Mode>;
std::string arm_name(const Arm& arm);

struct AblationRow {
  std::uint64_t seed = 0;
  std::string arm;
  double val_sisnr_db = 0.0;
};

struct AblationResult {
  double noisy_val_sisnr_db = 0.0;
  double teacher_val_sisnr_db = 0.0;
  std::vector<AblationRow> rows;

  /// Median over seeds of one arm's final validation SI-SNR.
  double median(const std::string& arm) const;
  double value(std::uint64_t seed, const std::string& arm) const;
};

using LogFn = std::function<void(const std::string&)>;

/// One shared teacher (seed cfg.seeds.front()) trained with the supervised
/// loss, then for every seed a directly trained student and one distilled
/// student per mode, all from the same initialization and batch order.
AblationResult run_ablation(const ExperimentConfig& cfg, const data::Dataset& dataset,
                            const std::vector<distill::Mode>& modes, const LogFn& log = {});

std::string ablation_csv(const AblationResult& result);

double median(std::vector<double> values);

}  // namespace atkl
