#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacnet/common.hpp"
#include "pacnet/noise.hpp"
#include "pacnet/optimizer.hpp"
#include "pacnet/patch_match.hpp"
#include "pacnet/scnn.hpp"
#include "pacnet/tcnn.hpp"

namespace pacnet {

// All run-time knobs in one flat key=value namespace. Resolution order:
// preset, then config file, then individual overrides; every run echoes the
// fully resolved table. Modes: pacnet (full pipeline), scnn3 (no temporal
// network), scnn0 (no temporal network and single-frame search, Ts forced
// to 0).
struct PipelineConfig {
  std::string mode = "pacnet";

  std::int64_t sqrtF = 15;
  std::int64_t sqrtf = 7;
  std::int64_t B = 89;
  std::int64_t Ts = 3;
  std::int64_t n = 14;

  std::int64_t channels = 3;  // 1 selects grayscale ingestion
  std::int64_t m = 7;
  std::int64_t blocks = 5;

  std::int64_t tcnn_Tt = 3;
  std::int64_t tcnn_ch3d = 48;
  std::int64_t tcnn_ch2d = 96;
  std::int64_t tcnn_layers2d = 17;
  double lrelu_slope = 0.1;

  double sigma = 25.0;
  bool clipped = false;
  std::uint64_t seed = 1;

  std::int64_t train_steps_spatial = 1200;
  std::int64_t train_steps_temporal = 350;
  std::int64_t train_batch = 8;
  std::int64_t epoch_steps = 100;  // decay schedule granularity
  double lr_spatial = 5e-3;
  double lr_temporal = 2e-3;
  double lr_decay = 0.999;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-6;
  bool trust_ratio = true;
  std::int64_t loss_margin = 5;  // border excluded from the training loss

  std::int64_t synth_frames = 5;
  std::int64_t synth_size = 40;
  std::int64_t synth_train_clips = 10;
  std::int64_t synth_holdout_clips = 4;

  bool cache = true;
  std::int64_t threads = 0;

  // ---- derived views ----
  std::int64_t f() const { return sqrtf * sqrtf; }
  std::int64_t effective_Ts() const { return mode == "scnn0" ? 0 : Ts; }

  PatchSpec patch_spec() const { return PatchSpec{sqrtF, sqrtf}; }
  SearchWindow search_window() const {
    return SearchWindow{B, effective_Ts()};
  }
  NoiseSpec noise_spec() const { return NoiseSpec{sigma, clipped, seed}; }

  ScnnConfig scnn_config() const {
    ScnnConfig cfg;
    cfg.n1 = n + 1;
    cfg.f1 = f() + 1;
    cfg.c = channels;
    cfg.m = m;
    cfg.blocks = blocks;
    return cfg;
  }

  TcnnConfig tcnn_config() const {
    TcnnConfig cfg;
    cfg.Tt = tcnn_Tt;
    cfg.ch3d = tcnn_ch3d;
    cfg.ch2d = tcnn_ch2d;
    cfg.layers2d = tcnn_layers2d;
    cfg.c = channels;
    cfg.lrelu_slope = lrelu_slope;
    return cfg;
  }

  OptimizerSpec optimizer_spec(bool temporal) const {
    OptimizerSpec spec;
    spec.learning_rate = temporal ? lr_temporal : lr_spatial;
    spec.decay_per_epoch = lr_decay;
    spec.beta1 = beta1;
    spec.beta2 = beta2;
    spec.epsilon = adam_eps;
    spec.layerwise_trust_ratio = trust_ratio;
    return spec;
  }

  void validate() const {
    require(mode == "pacnet" || mode == "scnn3" || mode == "scnn0",
            "mode must be pacnet, scnn3, or scnn0, got '", mode, "'");
    patch_spec().validate();
    search_window().validate(patch_spec());
    require(n >= 1, "search.n must be >= 1");
    require(channels == 1 || channels == 3, "channels must be 1 or 3");
    scnn_config().validate();
    tcnn_config().validate();
    noise_spec().validate();
    require(train_batch >= 1 && train_steps_spatial >= 0 &&
                train_steps_temporal >= 0 && epoch_steps >= 1,
            "training schedule values must be positive");
    require(loss_margin >= 0, "loss margin must be >= 0");
    require(synth_frames >= 1 && synth_size >= 8,
            "synthetic clips need >= 1 frame and size >= 8");
    optimizer_spec(false).validate();
    optimizer_spec(true).validate();
  }
};

namespace detail {

struct ConfigField {
  const char* key;
  enum Kind { kInt, kFloat, kBool, kString, kUint } kind;
  void* ptr;
};

inline std::vector<ConfigField> config_fields(PipelineConfig& c) {
  return {
      {"mode", ConfigField::kString, &c.mode},
      {"patch.sqrtF", ConfigField::kInt, &c.sqrtF},
      {"patch.sqrtf", ConfigField::kInt, &c.sqrtf},
      {"search.B", ConfigField::kInt, &c.B},
      {"search.Ts", ConfigField::kInt, &c.Ts},
      {"search.n", ConfigField::kInt, &c.n},
      {"color.channels", ConfigField::kInt, &c.channels},
      {"scnn.m", ConfigField::kInt, &c.m},
      {"scnn.blocks", ConfigField::kInt, &c.blocks},
      {"tcnn.Tt", ConfigField::kInt, &c.tcnn_Tt},
      {"tcnn.ch3d", ConfigField::kInt, &c.tcnn_ch3d},
      {"tcnn.ch2d", ConfigField::kInt, &c.tcnn_ch2d},
      {"tcnn.layers2d", ConfigField::kInt, &c.tcnn_layers2d},
      {"lrelu.slope", ConfigField::kFloat, &c.lrelu_slope},
      {"noise.sigma", ConfigField::kFloat, &c.sigma},
      {"noise.clipped", ConfigField::kBool, &c.clipped},
      {"seed", ConfigField::kUint, &c.seed},
      {"train.steps_spatial", ConfigField::kInt, &c.train_steps_spatial},
      {"train.steps_temporal", ConfigField::kInt, &c.train_steps_temporal},
      {"train.batch", ConfigField::kInt, &c.train_batch},
      {"train.epoch_steps", ConfigField::kInt, &c.epoch_steps},
      {"train.lr_spatial", ConfigField::kFloat, &c.lr_spatial},
      {"train.lr_temporal", ConfigField::kFloat, &c.lr_temporal},
      {"train.lr_decay", ConfigField::kFloat, &c.lr_decay},
      {"train.beta1", ConfigField::kFloat, &c.beta1},
      {"train.beta2", ConfigField::kFloat, &c.beta2},
      {"train.epsilon", ConfigField::kFloat, &c.adam_eps},
      {"train.trust_ratio", ConfigField::kBool, &c.trust_ratio},
      {"train.loss_margin", ConfigField::kInt, &c.loss_margin},
      {"synth.frames", ConfigField::kInt, &c.synth_frames},
      {"synth.size", ConfigField::kInt, &c.synth_size},
      {"synth.train_clips", ConfigField::kInt, &c.synth_train_clips},
      {"synth.holdout_clips", ConfigField::kInt, &c.synth_holdout_clips},
      {"cache.enabled", ConfigField::kBool, &c.cache},
      {"threads", ConfigField::kInt, &c.threads},
  };
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(cat("config key '", key, "': cannot parse '", v,
                       "' as a boolean"));
}

}  // namespace detail

inline void apply_config_value(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  for (const auto& field : detail::config_fields(cfg)) {
    if (key != field.key) continue;
    try {
      switch (field.kind) {
        case detail::ConfigField::kInt:
          *static_cast<std::int64_t*>(field.ptr) = std::stoll(value);
          return;
        case detail::ConfigField::kFloat:
          *static_cast<double*>(field.ptr) = std::stod(value);
          return;
        case detail::ConfigField::kBool:
          *static_cast<bool*>(field.ptr) = detail::parse_bool(value, key);
          return;
        case detail::ConfigField::kString:
          *static_cast<std::string*>(field.ptr) = value;
          return;
        case detail::ConfigField::kUint:
          *static_cast<std::uint64_t*>(field.ptr) = std::stoull(value);
          return;
      }
    } catch (const std::invalid_argument&) {
      throw UsageError(cat("config key '", key, "': cannot parse '", value,
                           "'"));
    } catch (const std::out_of_range&) {
      throw UsageError(cat("config key '", key, "': value '", value,
                           "' out of range"));
    }
  }
  throw UsageError(cat("unknown config key '", key, "'"));
}

// Reduced geometry exercising every structural property at a fraction of the
// default compute.
inline void apply_preset(PipelineConfig& cfg, const std::string& preset) {
  if (preset == "paper") {
    cfg = PipelineConfig{};
    return;
  }
  if (preset == "desk") {
    cfg = PipelineConfig{};
    cfg.sqrtF = 7;
    cfg.sqrtf = 3;
    cfg.B = 15;
    cfg.Ts = 1;
    cfg.n = 4;
    cfg.channels = 1;
    cfg.m = 3;
    cfg.tcnn_Tt = 1;
    cfg.tcnn_ch3d = 12;
    cfg.tcnn_ch2d = 16;
    cfg.tcnn_layers2d = 5;
    cfg.train_steps_spatial = 400;
    cfg.train_steps_temporal = 120;
    cfg.loss_margin = 0;
    cfg.synth_size = 32;
    return;
  }
  throw UsageError(cat("unknown preset '", preset,
                       "' (available: paper, desk)"));
}

inline void load_config_file(PipelineConfig& cfg,
                             const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file: ", path.string());
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(cat(path.string(), ":", std::to_string(lineno),
                           ": expected key=value, got '", line, "'"));
    apply_config_value(cfg, strip(line.substr(0, eq)),
                       strip(line.substr(eq + 1)));
  }
}

inline std::string config_echo(const PipelineConfig& cfg) {
  auto& mut = const_cast<PipelineConfig&>(cfg);
  std::ostringstream out;
  for (const auto& field : detail::config_fields(mut)) {
    out << field.key << " = ";
    switch (field.kind) {
      case detail::ConfigField::kInt:
        out << *static_cast<const std::int64_t*>(field.ptr);
        break;
      case detail::ConfigField::kFloat:
        out << *static_cast<const double*>(field.ptr);
        break;
      case detail::ConfigField::kBool:
        out << (*static_cast<const bool*>(field.ptr) ? "true" : "false");
        break;
      case detail::ConfigField::kString:
        out << *static_cast<const std::string*>(field.ptr);
        break;
      case detail::ConfigField::kUint:
        out << *static_cast<const std::uint64_t*>(field.ptr);
        break;
    }
    out << "\n";
  }
  return out.str();
}

// Architecture-determining subset, embedded in checkpoints and compared
// before any compute when a checkpoint is loaded.
inline nlohmann::json config_architecture_json(const PipelineConfig& cfg) {
  return nlohmann::json{
      {"sqrtF", cfg.sqrtF},       {"sqrtf", cfg.sqrtf},
      {"n", cfg.n},               {"channels", cfg.channels},
      {"m", cfg.m},               {"blocks", cfg.blocks},
      {"tcnn_Tt", cfg.tcnn_Tt},   {"tcnn_ch3d", cfg.tcnn_ch3d},
      {"tcnn_ch2d", cfg.tcnn_ch2d}, {"tcnn_layers2d", cfg.tcnn_layers2d},
  };
}

}  // namespace pacnet
