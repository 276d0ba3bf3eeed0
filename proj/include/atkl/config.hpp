#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atkl/data.hpp"
#include "atkl/distill.hpp"
#include "atkl/models.hpp"

namespace atkl {

/// Relative entries resolve against workdir.
struct Paths {
  std::string workdir = ".";
  std::string data = "data";
  std::string checkpoints = "checkpoints";
  std::string metrics = "metrics";

  bool operator==(const Paths&) const = default;
};

struct DatasetConfig {
  std::size_t clips = 200;
  std::uint64_t seed = 0;
  data::DatasetTemplate clip;

  bool operator==(const DatasetConfig&) const = default;
};

/// Everything a run needs. Defaults describe the desk-scale experiment.
///
/// The file format is YAML with the top-level sections paths, models
/// (teacher, student), full_scale (teacher, student, dccrn), distill, optim,
/// dataset and seeds. Missing keys keep their defaults; unknown keys are
/// rejected so typos do not pass silently.
struct ExperimentConfig {
  Paths paths;
  ModelConfig teacher = ModelConfig::teacher_desk();
  ModelConfig student = ModelConfig::student_desk();
  ModelConfig full_teacher = ModelConfig::teacher_full();
  ModelConfig full_student = ModelConfig::student_full();
  ModelConfig full_dccrn = ModelConfig::dccrn_full();
  distill::DistillConfig distill;
  distill::OptimConfig optim;
  DatasetConfig dataset;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& yaml);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string emit_config(const ExperimentConfig& cfg);

}  // namespace atkl
