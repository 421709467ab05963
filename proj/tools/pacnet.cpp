// Command-line front end: synthetic data generation, augmentation caching,
// the two training stages, denoising, and metric/parameter reports. Every
// subcommand resolves its configuration the same way (preset, then config
// file, then --set overrides) and echoes the resolved table before running.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacnet/config.hpp"
#include "pacnet/metrics.hpp"
#include "pacnet/parallel.hpp"
#include "pacnet/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pacnet;

namespace {

struct CommonOpts {
  std::string preset;
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--preset", opts.preset, "configuration preset: paper, desk");
  cmd->add_option("--config", opts.config_file, "key=value configuration file");
  cmd->add_option("--set", opts.overrides,
                  "override a single key, e.g. --set noise.sigma=50")
      ->take_all();
}

PipelineConfig resolve_config(const CommonOpts& opts) {
  PipelineConfig cfg;
  if (!opts.preset.empty()) apply_preset(cfg, opts.preset);
  if (!opts.config_file.empty()) load_config_file(cfg, opts.config_file);
  for (const std::string& kv : opts.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw UsageError(cat("--set expects key=value, got '", kv, "'"));
    apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  thread_count() = static_cast<int>(cfg.threads);
  std::cout << "# resolved configuration\n" << config_echo(cfg) << "\n";
  return cfg;
}

void save_output_sequence(const FrameSequence& seq, const std::string& dir,
                          const std::string& tensor_path) {
  if (!dir.empty()) save_sequence_ppm(seq, dir);
  if (!tensor_path.empty()) save_sequence_tensor(seq, tensor_path);
}

int run(int argc, char** argv) {
  CLI::App app{"patch-craft video denoiser"};
  app.require_subcommand(1);

  CommonOpts opts;

  // --- make-synthetic ---
  auto* cmd_synth = app.add_subcommand(
      "make-synthetic", "generate deterministic synthetic clips");
  std::string synth_out;
  std::int64_t synth_clips = 4;
  cmd_synth->add_option("--out", synth_out, "output directory")->required();
  cmd_synth->add_option("--clips", synth_clips, "number of clips");
  add_common(cmd_synth, opts);

  // --- augment ---
  auto* cmd_aug =
      app.add_subcommand("augment", "precompute the augmentation cache");
  std::string aug_input, aug_cache;
  cmd_aug->add_option("--input", aug_input, "sequence: PPM directory or .pct1")
      ->required();
  cmd_aug->add_option("--cache", aug_cache, "cache directory")->required();
  add_common(cmd_aug, opts);

  // --- train-spatial ---
  auto* cmd_ts = app.add_subcommand(
      "train-spatial", "train the spatial network on synthetic clips");
  std::string ts_out, ts_cache;
  cmd_ts->add_option("--out", ts_out, "checkpoint/loss output directory")
      ->required();
  cmd_ts->add_option("--cache", ts_cache, "augmentation cache directory");
  add_common(cmd_ts, opts);

  // --- train-temporal ---
  auto* cmd_tt = app.add_subcommand(
      "train-temporal", "train the temporal network against a frozen "
                        "spatial checkpoint");
  std::string tt_scnn, tt_out, tt_cache;
  cmd_tt->add_option("--scnn", tt_scnn, "spatial checkpoint directory")
      ->required();
  cmd_tt->add_option("--out", tt_out, "checkpoint/loss output directory")
      ->required();
  cmd_tt->add_option("--cache", tt_cache, "augmentation cache directory");
  add_common(cmd_tt, opts);

  // --- denoise ---
  auto* cmd_dn = app.add_subcommand("denoise", "denoise a sequence");
  std::string dn_input, dn_scnn, dn_tcnn, dn_out, dn_out_tensor, dn_clean,
      dn_report, dn_cache;
  bool dn_add_noise = false;
  cmd_dn->add_option("--input", dn_input, "sequence: PPM directory or .pct1")
      ->required();
  cmd_dn->add_option("--scnn", dn_scnn, "spatial checkpoint directory")
      ->required();
  cmd_dn->add_option("--tcnn", dn_tcnn,
                     "temporal checkpoint directory (pacnet mode)");
  cmd_dn->add_option("--out", dn_out, "output PPM directory");
  cmd_dn->add_option("--out-tensor", dn_out_tensor, "output .pct1 file");
  cmd_dn->add_option("--clean", dn_clean,
                     "reference sequence for the PSNR report");
  cmd_dn->add_option("--report", dn_report, "write per-frame PSNR CSV here");
  cmd_dn->add_option("--cache", dn_cache, "augmentation cache directory");
  cmd_dn->add_flag("--add-noise", dn_add_noise,
                   "treat --input as clean and apply the configured noise "
                   "first (it then doubles as the PSNR reference)");
  add_common(cmd_dn, opts);

  // --- psnr ---
  auto* cmd_psnr = app.add_subcommand("psnr", "per-frame and mean PSNR");
  std::string ps_clean, ps_test;
  cmd_psnr->add_option("--clean", ps_clean, "reference sequence")->required();
  cmd_psnr->add_option("--test", ps_test, "sequence under test")->required();
  add_common(cmd_psnr, opts);

  // --- params ---
  auto* cmd_params =
      app.add_subcommand("params", "parameter-count report");
  add_common(cmd_params, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (cmd_synth->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    const auto clips =
        synthetic_corpus(rng::derive(cfg.seed, "cli-corpus"), synth_clips,
                         cfg.synth_frames, cfg.synth_size, cfg.channels);
    for (std::size_t k = 0; k < clips.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof(name), "clip-%03zu", k);
      save_sequence_ppm(clips[k], fs::path(synth_out) / name);
    }
    std::cout << "wrote " << clips.size() << " clips to " << synth_out << "\n";
    return 0;
  }

  if (cmd_aug->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    const FrameSequence seq = load_sequence(aug_input, cfg.channels == 1);
    const std::string seq_hash = sequence_content_hash(seq);
    for (std::int64_t t = 0; t < seq.frame_count(); ++t) {
      bool hit = false;
      cached_augment(seq, t, cfg, aug_cache, seq_hash, &hit);
      std::cout << "frame " << t << (hit ? " (cached)" : " computed") << "\n";
    }
    return 0;
  }

  if (cmd_ts->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    SpatialModel model = make_spatial_model(cfg);
    const auto curve =
        train_spatial(cfg, training_corpus(cfg), model, ts_out, ts_cache);
    if (!curve.empty())
      std::cout << "final training mse " << curve.back().mse << " ("
                << curve.back().psnr_db << " dB) after " << curve.size()
                << " steps\n";
    std::cout << "checkpoints under " << ts_out << "\n";
    return 0;
  }

  if (cmd_tt->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    SpatialModel scnn = make_spatial_model(cfg);
    load_spatial_checkpoint(scnn, cfg, tt_scnn);
    TemporalModel model = make_temporal_model(cfg);
    const auto curve = train_temporal(cfg, training_corpus(cfg), scnn, model,
                                      tt_out, tt_cache);
    if (!curve.empty())
      std::cout << "final training mse " << curve.back().mse << " ("
                << curve.back().psnr_db << " dB) after " << curve.size()
                << " steps\n";
    std::cout << "checkpoints under " << tt_out << "\n";
    return 0;
  }

  if (cmd_dn->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    FrameSequence input = load_sequence(dn_input, cfg.channels == 1);
    FrameSequence reference;
    bool have_reference = false;
    if (dn_add_noise) {
      reference = input;
      have_reference = true;
      input = add_noise(reference, cfg.noise_spec());
    }
    if (!dn_clean.empty()) {
      reference = load_sequence(dn_clean, cfg.channels == 1);
      have_reference = true;
    }
    SpatialModel scnn = make_spatial_model(cfg);
    load_spatial_checkpoint(scnn, cfg, dn_scnn);
    TemporalModel tcnn;
    TemporalModel* tcnn_ptr = nullptr;
    if (cfg.mode == "pacnet") {
      if (dn_tcnn.empty())
        throw UsageError("mode pacnet needs --tcnn (or select mode scnn3 / "
                         "scnn0)");
      tcnn = make_temporal_model(cfg);
      load_temporal_checkpoint(tcnn, cfg, dn_tcnn);
      tcnn_ptr = &tcnn;
    }
    const DenoiseResult res =
        denoise(cfg, input, scnn, tcnn_ptr,
                have_reference ? &reference : nullptr, dn_cache);
    save_output_sequence(res.output, dn_out, dn_out_tensor);
    if (!dn_report.empty()) write_report_csv(res.report, dn_report);
    std::cout << format_run_report(res.report);
    return 0;
  }

  if (cmd_psnr->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    const FrameSequence clean = load_sequence(ps_clean, cfg.channels == 1);
    const FrameSequence test = load_sequence(ps_test, cfg.channels == 1);
    const auto per_frame = per_frame_psnr(clean, test);
    for (std::size_t i = 0; i < per_frame.size(); ++i)
      std::cout << "frame " << i << ": " << per_frame[i] << " dB\n";
    std::cout << "mean: " << sequence_psnr(clean, test) << " dB\n";
    return 0;
  }

  if (cmd_params->parsed()) {
    const PipelineConfig cfg = resolve_config(opts);
    std::cout << format_param_report(param_report(cfg));
    return 0;
  }

  throw UsageError("no subcommand selected");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
}
