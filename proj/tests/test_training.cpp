#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pacnet/pipeline.hpp"

using namespace pacnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() / tag) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PipelineConfig train_cfg() {
  PipelineConfig cfg;
  apply_preset(cfg, "desk");
  cfg.B = 9;
  cfg.synth_frames = 2;
  cfg.synth_size = 16;
  cfg.train_batch = 4;
  cfg.cache = false;
  return cfg;
}

std::vector<float> bank_snapshot(const ParamBank& bank) {
  std::vector<float> flat;
  for (std::size_t e = 0; e < bank.size(); ++e)
    for (std::int64_t i = 0; i < bank.entry(e).value.size(); ++i)
      flat.push_back(bank.entry(e).value[i]);
  return flat;
}

double tail_mean_mse(const std::vector<LossPoint>& curve, std::size_t n) {
  REQUIRE(curve.size() >= n);
  double acc = 0.0;
  for (std::size_t i = curve.size() - n; i < curve.size(); ++i)
    acc += curve[i].mse;
  return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("zero learning rate leaves the parameters untouched") {
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 2;
  cfg.lr_spatial = 0.0;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed, 2, 16, 16, 1);

  SpatialModel model = make_spatial_model(cfg);
  const std::vector<float> before = bank_snapshot(model.bank);
  const auto curve = train_spatial(cfg, {clip}, model);

  REQUIRE(curve.size() == 2);
  REQUIRE(curve[0].step == 1);
  REQUIRE(std::isfinite(curve[0].mse));
  const std::vector<float> after = bank_snapshot(model.bank);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    REQUIRE(before[i] == after[i]);
}

TEST_CASE("first-step loss sits at the noise floor when z starts at zero") {
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 1;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 1, 2, 16, 16, 1);

  SpatialModel model = make_spatial_model(cfg);
  // silence the last block: its neighbor stage output becomes exactly zero,
  // so the first prediction is the frame copy and the loss is the noise power
  Tensor& nw = model.net.layers.back().n_w->value;
  for (std::int64_t i = 0; i < nw.size(); ++i) nw[i] = 0.0f;

  const auto curve = train_spatial(cfg, {clip}, model);
  const double floor = (cfg.sigma / 255.0) * (cfg.sigma / 255.0);
  REQUIRE(curve.size() == 1);
  REQUIRE(curve[0].mse == Catch::Approx(floor).epsilon(0.20));
}

TEST_CASE("spatial training overfits one clip well below the noise floor") {
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 250;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 2, 2, 16, 16, 1);

  SpatialModel model = make_spatial_model(cfg);
  const auto curve = train_spatial(cfg, {clip}, model);
  REQUIRE(curve.size() == 250);

  const double first = curve.front().mse;
  const double last = tail_mean_mse(curve, 10);
  const double gain_db = 10.0 * std::log10(first / last);
  CAPTURE(first, last, gain_db);
  REQUIRE(gain_db >= 5.0);

  const double noise_floor = (cfg.sigma / 255.0) * (cfg.sigma / 255.0);
  REQUIRE(last < noise_floor);

  // the trained model beats the noisy input on its own clip
  const FrameSequence noisy = clip_noise(cfg, clip, 0);
  PipelineConfig eval_cfg = cfg;
  eval_cfg.mode = "scnn3";
  const DenoiseResult r = denoise(eval_cfg, noisy, model, nullptr, &clip);
  REQUIRE(r.report.mean_psnr > sequence_psnr(clip, noisy) + 2.0);
}

TEST_CASE("training is reproducible from the seed") {
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 40;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 3, 2, 16, 16, 1);

  SpatialModel a = make_spatial_model(cfg);
  SpatialModel b = make_spatial_model(cfg);
  const auto ca = train_spatial(cfg, {clip}, a);
  const auto cb = train_spatial(cfg, {clip}, b);

  REQUIRE(ca.size() == cb.size());
  for (std::size_t i = 0; i < ca.size(); ++i) {
    REQUIRE(ca[i].step == cb[i].step);
    REQUIRE(ca[i].mse == cb[i].mse);
  }
  const std::vector<float> fa = bank_snapshot(a.bank);
  const std::vector<float> fb = bank_snapshot(b.bank);
  for (std::size_t i = 0; i < fa.size(); ++i) REQUIRE(fa[i] == fb[i]);
}

TEST_CASE("epoch checkpoints and the loss curve land on disk") {
  TempDir td("pacnet-test-trainout");
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 40;
  cfg.epoch_steps = 20;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 4, 2, 16, 16, 1);

  SpatialModel model = make_spatial_model(cfg);
  const auto curve = train_spatial(cfg, {clip}, model, td.path);

  REQUIRE(fs::exists(td.path / "epoch-1" / "manifest.json"));
  REQUIRE(fs::exists(td.path / "epoch-2" / "manifest.json"));
  REQUIRE(fs::exists(td.path / "final" / "manifest.json"));
  REQUIRE(fs::exists(td.path / "loss.csv"));
  std::ifstream in(td.path / "loss.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  REQUIRE(lines == 41);  // header plus one row per step

  // the final checkpoint reproduces the trained model bit for bit
  PipelineConfig cfg2 = cfg;
  cfg2.seed = cfg.seed + 100;
  SpatialModel restored = make_spatial_model(cfg2);
  REQUIRE(load_spatial_checkpoint(restored, cfg2, td.path / "final") == 40);

  const FrameSequence noisy = clip_noise(cfg, clip, 0);
  PipelineConfig eval_cfg = cfg;
  eval_cfg.mode = "scnn3";
  const DenoiseResult want = denoise(eval_cfg, noisy, model, nullptr);
  const DenoiseResult got = denoise(eval_cfg, noisy, restored, nullptr);
  for (std::size_t f = 0; f < want.output.frames.size(); ++f)
    for (std::int64_t i = 0; i < want.output.frames[f].size(); ++i)
      REQUIRE(want.output.frames[f][i] == got.output.frames[f][i]);
}

TEST_CASE("zero-step training still writes a final checkpoint") {
  TempDir td("pacnet-test-zerostep");
  PipelineConfig cfg = train_cfg();
  cfg.train_steps_spatial = 0;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 5, 2, 16, 16, 1);
  SpatialModel model = make_spatial_model(cfg);
  const auto curve = train_spatial(cfg, {clip}, model, td.path);
  REQUIRE(curve.empty());
  REQUIRE(fs::exists(td.path / "final" / "manifest.json"));
  REQUIRE(fs::exists(td.path / "loss.csv"));
}

TEST_CASE("temporal training reduces its loss without touching the frozen "
          "spatial weights") {
  PipelineConfig cfg = train_cfg();
  cfg.synth_frames = 3;
  cfg.train_steps_temporal = 100;
  const FrameSequence clip = make_synthetic_clip(
      SyntheticKind::kTranslating, cfg.seed + 6, 3, 16, 16, 1);

  SpatialModel scnn = make_spatial_model(cfg);
  TemporalModel tcnn = make_temporal_model(cfg);
  const std::vector<float> scnn_before = bank_snapshot(scnn.bank);
  std::vector<float> running_before;
  detail::for_each_bn(scnn.net, [&](std::int64_t, BatchNormLayer& bn) {
    for (std::int64_t i = 0; i < bn.channels; ++i) {
      running_before.push_back(bn.running_mean[i]);
      running_before.push_back(bn.running_var[i]);
    }
  });

  const auto curve = train_temporal(cfg, {clip}, scnn, tcnn);
  REQUIRE(curve.size() == 100);

  const std::vector<float> scnn_after = bank_snapshot(scnn.bank);
  for (std::size_t i = 0; i < scnn_before.size(); ++i)
    REQUIRE(scnn_before[i] == scnn_after[i]);
  std::vector<float> running_after;
  detail::for_each_bn(scnn.net, [&](std::int64_t, BatchNormLayer& bn) {
    for (std::int64_t i = 0; i < bn.channels; ++i) {
      running_after.push_back(bn.running_mean[i]);
      running_after.push_back(bn.running_var[i]);
    }
  });
  for (std::size_t i = 0; i < running_before.size(); ++i)
    REQUIRE(running_before[i] == running_after[i]);

  // the refiner starts as a pass-through of the spatial output, so the first
  // step's loss is that baseline; training must improve on it
  const double first = curve.front().mse;
  const double last = tail_mean_mse(curve, 5);
  CAPTURE(first, last);
  REQUIRE(last < 0.9 * first);

  // and end to end the refined output is no worse than the spatial one
  const FrameSequence noisy = clip_noise(cfg, clip, 0);
  PipelineConfig eval_cfg = cfg;
  eval_cfg.mode = "scnn3";
  const DenoiseResult spatial = denoise(eval_cfg, noisy, scnn, nullptr, &clip);
  eval_cfg.mode = "pacnet";
  const DenoiseResult refined =
      denoise(eval_cfg, noisy, scnn, &tcnn, &clip);
  CAPTURE(spatial.report.mean_psnr, refined.report.mean_psnr);
  REQUIRE(refined.report.mean_psnr >= spatial.report.mean_psnr);
}
