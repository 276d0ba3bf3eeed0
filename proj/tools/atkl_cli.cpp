// Command-line driver: data generation, training, distillation, evaluation,
// parameter counting and gradient checking.
//
// Exit codes: 0 success, 2 usage or configuration problem (including missing
// files), 3 numeric failure (diverged training, failed gradient check).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "atkl/config.hpp"
#include "atkl/experiment.hpp"
#include "atkl/gradsuite.hpp"

namespace fs = std::filesystem;
using namespace atkl;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Context {
  std::string config_path;
  std::string workdir;
  ExperimentConfig cfg;
  fs::path root;

  void load() {
    if (!config_path.empty()) cfg = load_config(config_path);
    if (!workdir.empty()) {
      root = workdir;
    } else if (const char* env = std::getenv("ATKL_WORKDIR"); env && *env) {
      root = env;
    } else {
      root = cfg.paths.workdir;
    }
  }
  fs::path under(const std::string& p) const { return fs::path(p).is_absolute() ? fs::path(p) : root / p; }
  fs::path data_dir() const { return under(cfg.paths.data); }
  fs::path checkpoint(const std::string& name) const { return under(cfg.paths.checkpoints) / (name + ".ckpt"); }
  fs::path metrics(const std::string& name) const { return under(cfg.paths.metrics) / (name + ".csv"); }
};

std::string run_name(const std::string& what, std::uint64_t seed) { return what + "_s" + std::to_string(seed); }

data::Dataset load_data(const fs::path& dir, std::size_t sample_rate) {
  if (!fs::exists(dir / "manifest.csv")) throw UsageError("no dataset in " + dir.string() + " (run gen-data first)");
  data::Dataset ds = data::read_dataset(dir);
  if (ds.sample_rate != sample_rate) {
    throw ConfigError("dataset sample rate " + std::to_string(ds.sample_rate) + " Hz does not match the model's " +
                      std::to_string(sample_rate) + " Hz");
  }
  return ds;
}

void print_row(const distill::MetricsRow& r) {
  std::fprintf(stderr, "step %zu  loss %.4f  val %.3f dB  lr %.3g\n", r.step, r.loss_kd, r.val_sisnr_db, r.lr);
}

void finish_run(const Context& ctx, const std::string& name, const Model& model, const distill::TrainResult& r) {
  const fs::path ckpt = ctx.checkpoint(name);
  fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt, model);
  distill::write_metrics_csv(ctx.metrics(name), r.metrics);
  std::printf("%s: final validation SI-SNR %.3f dB\ncheckpoint %s\n", name.c_str(), r.final_val_sisnr_db,
              ckpt.string().c_str());
}

int run_eval(const Context& ctx, const std::string& ckpt, const std::string& data_dir, const std::string& split) {
  const Model model = load_checkpoint(ckpt);
  const data::Dataset ds = load_data(data_dir.empty() ? ctx.data_dir() : fs::path(data_dir), model.config().stft.sample_rate);
  std::vector<const data::Clip*> clips;
  if (split != "val") for (const auto& c : ds.train) clips.push_back(&c);
  if (split != "train") for (const auto& c : ds.val) clips.push_back(&c);

  std::printf("clip,sisnr_noisy_db,sisnr_enhanced_db,delta_db\n");
  std::vector<double> noisy, enhanced, delta;
  NoGradGuard guard;
  for (const data::Clip* c : clips) {
    const double n = distill::si_snr(c->noisy, c->clean).item();
    const double e = distill::si_snr(model.enhance(c->noisy), c->clean).item();
    std::printf("%zu,%.6f,%.6f,%.6f\n", c->index, n, e, e - n);
    noisy.push_back(n);
    enhanced.push_back(e);
    delta.push_back(e - n);
  }
  if (clips.empty()) throw UsageError("eval: no clips in split '" + split + "'");
  std::printf("median,%.6f,%.6f,%.6f\n", median(noisy), median(enhanced), median(delta));
  return 0;
}

int run_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& c : run_gradient_suite(seed)) {
    std::printf("%-24s %.3e %s\n", c.name.c_str(), c.worst_rel_error, c.passed ? "ok" : "FAILED");
    ok = ok && c.passed;
  }
  std::printf("%s\n", ok ? "all gradient checks passed" : "gradient check failures");
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-transfer KL distillation for complex U-Net speech enhancement"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  app.add_option("--config", ctx.config_path, "YAML experiment config (defaults: desk scale)");
  app.add_option("--workdir", ctx.workdir, "Working directory (default: $ATKL_WORKDIR, then the config's)");

  std::uint64_t seed = 0;
  std::optional<std::size_t> steps;
  std::string data_dir, out_dir, ckpt, teacher_ckpt, mode_name, split = "val", which, scale = "full";
  std::vector<std::string> modes{"output_only", "at_kl"};

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset as WAV pairs plus manifest.csv");
  gen->add_option("--out", out_dir, "Output directory (default: <workdir>/data)");
  gen->add_option("--seed", seed, "Dataset seed (default: the config's)");

  auto add_train_options = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Run seed");
    cmd->add_option("--data", data_dir, "Dataset directory (default: <workdir>/data)");
    cmd->add_option("--steps", steps, "Override the optimizer step budget");
  };
  auto* teacher_cmd = app.add_subcommand("train-teacher", "Pretrain the teacher with the supervised SI-SNR loss");
  add_train_options(teacher_cmd);
  auto* baseline = app.add_subcommand("train-baseline", "Train the student directly, without distillation");
  add_train_options(baseline);
  auto* distill_cmd = app.add_subcommand("distill", "Distill a frozen teacher into a fresh student");
  add_train_options(distill_cmd);
  distill_cmd->add_option("--mode", mode_name, "output_only | at | kl_enc | kl_dec | kl_all | at_kl")->required();
  distill_cmd->add_option("--teacher", teacher_ckpt, "Teacher checkpoint (default: checkpoints/teacher_s<seed>)");

  auto* eval = app.add_subcommand("eval", "Per-clip SI-SNR of a checkpoint as CSV");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--data", data_dir, "Dataset directory (default: <workdir>/data)");
  eval->add_option("--split", split, "val | train | all")->check(CLI::IsMember({"val", "train", "all"}));

  auto* count = app.add_subcommand("count-params", "Print the exact parameter count of a model");
  count->add_option("--which", which, "student | teacher | dccrn")
      ->required()
      ->check(CLI::IsMember({"student", "teacher", "dccrn"}));
  count->add_option("--scale", scale, "full | desk")->check(CLI::IsMember({"full", "desk"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  gradcheck->add_option("--seed", seed, "Random seed for the probe inputs");

  auto* ablation = app.add_subcommand("ablation", "Shared teacher, then direct and distilled students per seed");
  ablation->add_option("--data", data_dir, "Dataset directory (default: <workdir>/data)");
  ablation->add_option("--steps", steps, "Override the optimizer step budget");
  ablation->add_option("--modes", modes, "Distillation modes to compare with direct training");

  app.add_subcommand("print-config", "Print the effective configuration as YAML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed() && ctx.config_path.empty()) throw UsageError("gen-data requires --config");
    ctx.load();
    if (steps) ctx.cfg.optim.steps = *steps;
    const auto data_path = [&] { return data_dir.empty() ? ctx.data_dir() : fs::path(data_dir); };

    if (gen->parsed()) {
      if (gen->count("--seed")) ctx.cfg.dataset.seed = seed;
      const fs::path out = out_dir.empty() ? ctx.data_dir() : fs::path(out_dir);
      const data::Dataset ds = make_experiment_dataset(ctx.cfg.dataset);
      data::write_dataset(out, ds, ctx.cfg.dataset.clip.sample_rate);
      std::printf("wrote %zu train + %zu val clips to %s\n", ds.train.size(), ds.val.size(), out.string().c_str());
    } else if (teacher_cmd->parsed()) {
      const data::Dataset ds = load_data(data_path(), ctx.cfg.teacher.stft.sample_rate);
      Model teacher(ctx.cfg.teacher, init_seed(seed));
      const auto r = distill::train_teacher(teacher, ds, run_optim(ctx.cfg, seed), print_row);
      finish_run(ctx, run_name("teacher", seed), teacher, r);
    } else if (baseline->parsed()) {
      const data::Dataset ds = load_data(data_path(), ctx.cfg.student.stft.sample_rate);
      Model student(ctx.cfg.student, init_seed(seed));
      const auto r = distill::train_supervised(student, ds, run_optim(ctx.cfg, seed), print_row);
      finish_run(ctx, run_name("student_direct", seed), student, r);
    } else if (distill_cmd->parsed()) {
      const distill::Mode mode = distill::parse_mode(mode_name);
      const fs::path tpath = teacher_ckpt.empty() ? ctx.checkpoint(run_name("teacher", seed)) : fs::path(teacher_ckpt);
      if (!fs::exists(tpath)) throw UsageError("teacher checkpoint " + tpath.string() + " not found");
      Model teacher = load_checkpoint(tpath);
      teacher.set_trainable(false);
      const data::Dataset ds = load_data(data_path(), ctx.cfg.student.stft.sample_rate);
      Model student(ctx.cfg.student, init_seed(seed));
      const auto r = distill::run_distillation(teacher, student, ds, ctx.cfg.distill, run_optim(ctx.cfg, seed), mode,
                                               print_row);
      finish_run(ctx, run_name("student_" + distill::to_string(mode), seed), student, r);
    } else if (eval->parsed()) {
      return run_eval(ctx, ckpt, data_dir, split);
    } else if (count->parsed()) {
      const bool full = scale == "full";
      const ModelConfig& m = which == "student" ? (full ? ctx.cfg.full_student : ctx.cfg.student)
                             : which == "teacher" ? (full ? ctx.cfg.full_teacher : ctx.cfg.teacher)
                                                  : ctx.cfg.full_dccrn;
      std::printf("%zu\n", count_params(m));
    } else if (gradcheck->parsed()) {
      return run_gradcheck(seed);
    } else if (ablation->parsed()) {
      std::vector<distill::Mode> parsed;
      for (const auto& m : modes) parsed.push_back(distill::parse_mode(m));
      const data::Dataset ds = load_data(data_path(), ctx.cfg.student.stft.sample_rate);
      const AblationResult r =
          run_ablation(ctx.cfg, ds, parsed, [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); });
      const fs::path out = ctx.metrics("ablation");
      fs::create_directories(out.parent_path());
      std::ofstream(out) << ablation_csv(r);
      std::printf("noisy %.3f dB, teacher %.3f dB\n", r.noisy_val_sisnr_db, r.teacher_val_sisnr_db);
      std::printf("median direct %.3f dB\n", r.median("direct"));
      for (const auto& m : modes) std::printf("median %s %.3f dB\n", m.c_str(), r.median(m));
    } else {
      std::printf("%s", emit_config(ctx.cfg).c_str());
    }
    return 0;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "error: training diverged at %s\n", e.what());
    return kExitNumeric;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
