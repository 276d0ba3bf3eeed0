#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "atkl/config.hpp"
#include "atkl/errors.hpp"

namespace atkl {

namespace {

// Rejects keys outside `allowed` in a mapping node.
void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigError("config: " + where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config: bad value for " + where + "." + key);
  }
}

void read_model(const YAML::Node& node, const std::string& where, ModelConfig& m) {
  if (!node) return;
  check_keys(node, where,
             {"sample_rate", "win_len", "hop_len", "fft_size", "enc_channels", "lstm_hidden", "lstm_layers"});
  read(node, "sample_rate", m.stft.sample_rate, where);
  read(node, "win_len", m.stft.win_len, where);
  read(node, "hop_len", m.stft.hop_len, where);
  read(node, "fft_size", m.stft.fft_size, where);
  read(node, "enc_channels", m.enc_channels, where);
  read(node, "lstm_hidden", m.lstm_hidden, where);
  read(node, "lstm_layers", m.lstm_layers, where);
}

void emit_model(YAML::Emitter& out, const char* key, const ModelConfig& m) {
  out << YAML::Key << key << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sample_rate" << YAML::Value << m.stft.sample_rate;
  out << YAML::Key << "win_len" << YAML::Value << m.stft.win_len;
  out << YAML::Key << "hop_len" << YAML::Value << m.stft.hop_len;
  out << YAML::Key << "fft_size" << YAML::Value << m.stft.fft_size;
  out << YAML::Key << "enc_channels" << YAML::Value << YAML::Flow << m.enc_channels;
  out << YAML::Key << "lstm_hidden" << YAML::Value << m.lstm_hidden;
  out << YAML::Key << "lstm_layers" << YAML::Value << m.lstm_layers;
  out << YAML::EndMap;
}

std::string to_string(distill::KlDirection d) {
  return d == distill::KlDirection::student_to_teacher ? "student_to_teacher" : "teacher_to_student";
}

distill::KlDirection parse_direction(const std::string& s) {
  if (s == "student_to_teacher") return distill::KlDirection::student_to_teacher;
  if (s == "teacher_to_student") return distill::KlDirection::teacher_to_student;
  throw ConfigError("config: unknown kl_direction '" + s + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  for (const ModelConfig* m : {&teacher, &student, &full_teacher, &full_student, &full_dccrn}) m->validate();
  require_compatible(teacher.stft, student.stft);
  if (teacher.enc_channels.size() != student.enc_channels.size()) {
    throw ConfigError("config: teacher and student need the same number of layers");
  }
  distill.validate();
  optim.validate();
  dataset.clip.validate();
  if (dataset.clips < 2) throw ConfigError("config: dataset.clips must be at least 2");
  if (dataset.clip.sample_rate != student.stft.sample_rate) {
    throw ConfigError("config: dataset sample rate differs from the models'");
  }
  if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
}

ExperimentConfig parse_config(const std::string& yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  if (root.IsNull()) return cfg;
  check_keys(root, "top level", {"paths", "models", "full_scale", "distill", "optim", "dataset", "seeds"});

  if (const auto p = root["paths"]) {
    check_keys(p, "paths", {"workdir", "data", "checkpoints", "metrics"});
    read(p, "workdir", cfg.paths.workdir, "paths");
    read(p, "data", cfg.paths.data, "paths");
    read(p, "checkpoints", cfg.paths.checkpoints, "paths");
    read(p, "metrics", cfg.paths.metrics, "paths");
  }
  if (const auto m = root["models"]) {
    check_keys(m, "models", {"teacher", "student"});
    read_model(m["teacher"], "models.teacher", cfg.teacher);
    read_model(m["student"], "models.student", cfg.student);
  }
  if (const auto f = root["full_scale"]) {
    check_keys(f, "full_scale", {"teacher", "student", "dccrn"});
    read_model(f["teacher"], "full_scale.teacher", cfg.full_teacher);
    read_model(f["student"], "full_scale.student", cfg.full_student);
    read_model(f["dccrn"], "full_scale.dccrn", cfg.full_dccrn);
  }
  if (const auto d = root["distill"]) {
    check_keys(d, "distill", {"lambda", "alpha", "beta", "gamma", "eta", "kl_direction"});
    read(d, "lambda", cfg.distill.lambda, "distill");
    read(d, "alpha", cfg.distill.alpha, "distill");
    read(d, "beta", cfg.distill.weights.beta, "distill");
    read(d, "gamma", cfg.distill.weights.gamma, "distill");
    read(d, "eta", cfg.distill.weights.eta, "distill");
    std::string dir = to_string(cfg.distill.kl_direction);
    read(d, "kl_direction", dir, "distill");
    cfg.distill.kl_direction = parse_direction(dir);
  }
  if (const auto o = root["optim"]) {
    check_keys(o, "optim", {"lr", "beta1", "beta2", "eps", "steps", "batch", "eval_every"});
    read(o, "lr", cfg.optim.lr, "optim");
    read(o, "beta1", cfg.optim.beta1, "optim");
    read(o, "beta2", cfg.optim.beta2, "optim");
    read(o, "eps", cfg.optim.eps, "optim");
    read(o, "steps", cfg.optim.steps, "optim");
    read(o, "batch", cfg.optim.batch, "optim");
    read(o, "eval_every", cfg.optim.eval_every, "optim");
  }
  if (const auto d = root["dataset"]) {
    check_keys(d, "dataset",
               {"clips", "seed", "sample_rate", "duration", "snr_min_db", "snr_max_db", "clean_kinds", "noise_kinds"});
    read(d, "clips", cfg.dataset.clips, "dataset");
    read(d, "seed", cfg.dataset.seed, "dataset");
    read(d, "sample_rate", cfg.dataset.clip.sample_rate, "dataset");
    read(d, "duration", cfg.dataset.clip.duration, "dataset");
    read(d, "snr_min_db", cfg.dataset.clip.snr_min_db, "dataset");
    read(d, "snr_max_db", cfg.dataset.clip.snr_max_db, "dataset");
    if (d["clean_kinds"]) {
      std::vector<std::string> names;
      read(d, "clean_kinds", names, "dataset");
      cfg.dataset.clip.clean_kinds.clear();
      for (const auto& n : names) cfg.dataset.clip.clean_kinds.push_back(data::parse_clean_kind(n));
    }
    if (d["noise_kinds"]) {
      std::vector<std::string> names;
      read(d, "noise_kinds", names, "dataset");
      cfg.dataset.clip.noise_kinds.clear();
      for (const auto& n : names) cfg.dataset.clip.noise_kinds.push_back(data::parse_noise_kind(n));
    }
  }
  read(root, "seeds", cfg.seeds, "top level");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;

  out << YAML::Key << "paths" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "workdir" << YAML::Value << cfg.paths.workdir;
  out << YAML::Key << "data" << YAML::Value << cfg.paths.data;
  out << YAML::Key << "checkpoints" << YAML::Value << cfg.paths.checkpoints;
  out << YAML::Key << "metrics" << YAML::Value << cfg.paths.metrics;
  out << YAML::EndMap;

  out << YAML::Key << "models" << YAML::Value << YAML::BeginMap;
  emit_model(out, "teacher", cfg.teacher);
  emit_model(out, "student", cfg.student);
  out << YAML::EndMap;

  out << YAML::Key << "full_scale" << YAML::Value << YAML::BeginMap;
  emit_model(out, "teacher", cfg.full_teacher);
  emit_model(out, "student", cfg.full_student);
  emit_model(out, "dccrn", cfg.full_dccrn);
  out << YAML::EndMap;

  const auto& d = cfg.distill;
  out << YAML::Key << "distill" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lambda" << YAML::Value << d.lambda;
  out << YAML::Key << "alpha" << YAML::Value << d.alpha;
  out << YAML::Key << "beta" << YAML::Value << d.weights.beta;
  out << YAML::Key << "gamma" << YAML::Value << d.weights.gamma;
  out << YAML::Key << "eta" << YAML::Value << d.weights.eta;
  out << YAML::Key << "kl_direction" << YAML::Value << to_string(d.kl_direction);
  out << YAML::EndMap;

  const auto& o = cfg.optim;
  out << YAML::Key << "optim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lr" << YAML::Value << o.lr;
  out << YAML::Key << "beta1" << YAML::Value << o.beta1;
  out << YAML::Key << "beta2" << YAML::Value << o.beta2;
  out << YAML::Key << "eps" << YAML::Value << o.eps;
  out << YAML::Key << "steps" << YAML::Value << o.steps;
  out << YAML::Key << "batch" << YAML::Value << o.batch;
  out << YAML::Key << "eval_every" << YAML::Value << o.eval_every;
  out << YAML::EndMap;

  const auto& ds = cfg.dataset;
  std::vector<std::string> clean, noise;
  for (auto k : ds.clip.clean_kinds) clean.push_back(data::to_string(k));
  for (auto k : ds.clip.noise_kinds) noise.push_back(data::to_string(k));
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "clips" << YAML::Value << ds.clips;
  out << YAML::Key << "seed" << YAML::Value << ds.seed;
  out << YAML::Key << "sample_rate" << YAML::Value << ds.clip.sample_rate;
  out << YAML::Key << "duration" << YAML::Value << ds.clip.duration;
  out << YAML::Key << "snr_min_db" << YAML::Value << ds.clip.snr_min_db;
  out << YAML::Key << "snr_max_db" << YAML::Value << ds.clip.snr_max_db;
  out << YAML::Key << "clean_kinds" << YAML::Value << YAML::Flow << clean;
  out << YAML::Key << "noise_kinds" << YAML::Value << YAML::Flow << noise;
  out << YAML::EndMap;

  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << cfg.seeds;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace atkl
