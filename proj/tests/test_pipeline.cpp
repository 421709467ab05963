#include <catch2/catch_amalgamated.hpp>

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

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// desk geometry shrunk further so whole-pipeline tests stay fast
PipelineConfig small_cfg() {
  PipelineConfig cfg;
  apply_preset(cfg, "desk");
  cfg.B = 9;
  cfg.synth_frames = 3;
  cfg.synth_size = 16;
  return cfg;
}

void require_frames_equal(const FrameSequence& a, const FrameSequence& b) {
  REQUIRE(a.frame_count() == b.frame_count());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    REQUIRE(a.frames[f].same_shape(b.frames[f]));
    for (std::int64_t i = 0; i < a.frames[f].size(); ++i)
      REQUIRE(a.frames[f][i] == b.frames[f][i]);
  }
}

void flip_last_byte(const fs::path& p) {
  std::string bytes = slurp(p);
  REQUIRE(!bytes.empty());
  bytes.back() = static_cast<char>(bytes.back() ^ 0x01);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("presets and overrides resolve in order") {
  PipelineConfig cfg;
  apply_preset(cfg, "paper");
  REQUIRE(cfg.sqrtF == 15);
  REQUIRE(cfg.B == 89);
  REQUIRE(cfg.n == 14);

  apply_preset(cfg, "desk");
  REQUIRE(cfg.sqrtF == 7);
  REQUIRE(cfg.channels == 1);
  REQUIRE_NOTHROW(cfg.validate());

  apply_config_value(cfg, "search.n", "6");
  REQUIRE(cfg.n == 6);
  apply_config_value(cfg, "noise.sigma", "12.5");
  REQUIRE(cfg.sigma == 12.5);
  apply_config_value(cfg, "noise.clipped", "yes");
  REQUIRE(cfg.clipped);
  apply_config_value(cfg, "seed", "77");
  REQUIRE(cfg.seed == 77);
  apply_config_value(cfg, "mode", "scnn0");
  REQUIRE(cfg.effective_Ts() == 0);
  apply_config_value(cfg, "mode", "scnn3");
  REQUIRE(cfg.effective_Ts() == cfg.Ts);

  REQUIRE_THROWS_AS(apply_config_value(cfg, "search.q", "1"), UsageError);
  REQUIRE_THROWS_AS(apply_config_value(cfg, "search.n", "soon"), UsageError);
  REQUIRE_THROWS_AS(apply_config_value(cfg, "noise.clipped", "maybe"),
                    UsageError);
  REQUIRE_THROWS_AS(apply_preset(cfg, "pocket"), UsageError);
}

TEST_CASE("config files tolerate comments and reject junk") {
  TempDir td("pacnet-test-configfile");
  const fs::path good = td.path / "run.cfg";
  {
    std::ofstream out(good);
    out << "# full comment line\n"
        << "mode = scnn3\n"
        << "search.n = 5   # trailing comment\n"
        << "\n"
        << "noise.sigma=30\n";
  }
  PipelineConfig cfg = small_cfg();
  load_config_file(cfg, good);
  REQUIRE(cfg.mode == "scnn3");
  REQUIRE(cfg.n == 5);
  REQUIRE(cfg.sigma == 30.0);

  const fs::path junk = td.path / "junk.cfg";
  {
    std::ofstream out(junk);
    out << "windmill\n";
  }
  REQUIRE_THROWS_AS(load_config_file(cfg, junk), UsageError);
  REQUIRE_THROWS_AS(load_config_file(cfg, td.path / "missing.cfg"),
                    DataError);
}

TEST_CASE("resolved configuration echo lists every knob") {
  PipelineConfig cfg = small_cfg();
  cfg.mode = "scnn0";
  const std::string echo = config_echo(cfg);
  REQUIRE(echo.find("mode = scnn0") != std::string::npos);
  REQUIRE(echo.find("search.B = 9") != std::string::npos);
  REQUIRE(echo.find("patch.sqrtF = 7") != std::string::npos);
  REQUIRE(echo.find("cache.enabled = true") != std::string::npos);
  std::size_t lines = 0;
  for (char ch : echo) lines += ch == '\n';
  PipelineConfig probe;
  REQUIRE(lines == detail::config_fields(probe).size());
}

TEST_CASE("validation rejects inconsistent settings") {
  PipelineConfig cfg = small_cfg();
  REQUIRE_NOTHROW(cfg.validate());

  cfg.mode = "turbo";
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.sqrtf = 4;
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.B = 8;
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.B = 5;  // below sqrtF
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.channels = 2;
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.n = 0;
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
  cfg = small_cfg();
  cfg.loss_margin = -1;
  REQUIRE_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("spatial checkpoints round-trip parameters and running stats") {
  TempDir td("pacnet-test-scnn-ckpt");
  PipelineConfig cfg = small_cfg();
  SpatialModel a = make_spatial_model(cfg);
  // give the running statistics non-default values so the trip is visible
  detail::for_each_bn(a.net, [](std::int64_t b, BatchNormLayer& bn) {
    for (std::int64_t i = 0; i < bn.channels; ++i) {
      bn.running_mean[i] = 0.125f * static_cast<float>(b + i);
      bn.running_var[i] = 1.0f + 0.0625f * static_cast<float>(i);
    }
  });
  save_spatial_checkpoint(a, cfg, 17, td.path / "ck");

  PipelineConfig cfg2 = cfg;
  cfg2.seed = cfg.seed + 99;  // different init, same architecture
  SpatialModel b = make_spatial_model(cfg2);
  REQUIRE(load_spatial_checkpoint(b, cfg2, td.path / "ck") == 17);

  REQUIRE(a.bank.size() == b.bank.size());
  for (std::size_t e = 0; e < a.bank.size(); ++e) {
    REQUIRE(a.bank.entry(e).name == b.bank.entry(e).name);
    for (std::int64_t i = 0; i < a.bank.entry(e).value.size(); ++i)
      REQUIRE(a.bank.entry(e).value[i] == b.bank.entry(e).value[i]);
  }
  REQUIRE(a.net.bns.size() == b.net.bns.size());
  for (std::size_t k = 0; k < a.net.bns.size(); ++k)
    for (std::int64_t i = 0; i < a.net.bns[k].channels; ++i) {
      REQUIRE(a.net.bns[k].running_mean[i] == b.net.bns[k].running_mean[i]);
      REQUIRE(a.net.bns[k].running_var[i] == b.net.bns[k].running_var[i]);
    }
}

TEST_CASE("checkpoints from a different architecture are rejected") {
  TempDir td("pacnet-test-ckpt-arch");
  PipelineConfig cfg = small_cfg();
  SpatialModel a = make_spatial_model(cfg);
  save_spatial_checkpoint(a, cfg, 1, td.path / "ck");

  PipelineConfig other = cfg;
  other.m = 5;
  SpatialModel b = make_spatial_model(other);
  REQUIRE_THROWS_AS(load_spatial_checkpoint(b, other, td.path / "ck"),
                    DataError);

  // a spatial checkpoint is not a temporal one
  TemporalModel t = make_temporal_model(cfg);
  REQUIRE_THROWS_AS(load_temporal_checkpoint(t, cfg, td.path / "ck"),
                    DataError);

  // flipping one payload byte must be caught by the per-tensor hash
  fs::path victim;
  for (const auto& entry : fs::directory_iterator(td.path / "ck"))
    if (entry.path().extension() == ".pct1") victim = entry.path();
  REQUIRE(!victim.empty());
  flip_last_byte(victim);
  SpatialModel c = make_spatial_model(cfg);
  REQUIRE_THROWS_WITH(load_spatial_checkpoint(c, cfg, td.path / "ck"),
                      Catch::Matchers::ContainsSubstring("corrupted"));
}

TEST_CASE("temporal checkpoints round-trip") {
  TempDir td("pacnet-test-tcnn-ckpt");
  PipelineConfig cfg = small_cfg();
  TemporalModel a = make_temporal_model(cfg);
  save_temporal_checkpoint(a, cfg, 3, td.path / "ck");

  PipelineConfig cfg2 = cfg;
  cfg2.seed = cfg.seed + 5;
  TemporalModel b = make_temporal_model(cfg2);
  REQUIRE(load_temporal_checkpoint(b, cfg2, td.path / "ck") == 3);
  REQUIRE(a.bank.size() == b.bank.size());
  for (std::size_t e = 0; e < a.bank.size(); ++e)
    for (std::int64_t i = 0; i < a.bank.entry(e).value.size(); ++i)
      REQUIRE(a.bank.entry(e).value[i] == b.bank.entry(e).value[i]);
}

TEST_CASE("augmented inputs are memoized with integrity checks") {
  TempDir td("pacnet-test-augcache");
  PipelineConfig cfg = small_cfg();
  const FrameSequence clean = make_synthetic_clip(
      SyntheticKind::kTranslating, 5, 2, cfg.synth_size, cfg.synth_size, 1);
  const FrameSequence noisy = add_noise(clean, cfg.noise_spec());

  const Tensor direct = augment_frame(noisy, 0, cfg.patch_spec(),
                                      cfg.search_window(), cfg.n);
  bool hit = true;
  const Tensor first = cached_augment(noisy, 0, cfg, td.path, "", &hit);
  REQUIRE_FALSE(hit);
  REQUIRE(first.same_shape(direct));
  for (std::int64_t i = 0; i < first.size(); ++i)
    REQUIRE(first[i] == direct[i]);

  const Tensor second = cached_augment(noisy, 0, cfg, td.path, "", &hit);
  REQUIRE(hit);
  for (std::int64_t i = 0; i < second.size(); ++i)
    REQUIRE(second[i] == direct[i]);

  cached_augment(noisy, 1, cfg, td.path);  // second frame, second entry
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(td.path))
    if (e.path().extension() == ".pct1") entries.push_back(e.path());
  REQUIRE(entries.size() == 2);

  for (const fs::path& p : entries) flip_last_byte(p);
  REQUIRE_THROWS_WITH(cached_augment(noisy, 0, cfg, td.path),
                      Catch::Matchers::ContainsSubstring("corrupted"));

  // disabled cache computes directly and leaves no files behind
  TempDir cold("pacnet-test-augcache-off");
  PipelineConfig nocache = cfg;
  nocache.cache = false;
  const Tensor third = cached_augment(noisy, 0, nocache, cold.path, "", &hit);
  REQUIRE_FALSE(hit);
  for (std::int64_t i = 0; i < third.size(); ++i)
    REQUIRE(third[i] == direct[i]);
  REQUIRE(fs::is_empty(cold.path));
}

TEST_CASE("single-frame clips make the temporal search degenerate") {
  PipelineConfig cfg = small_cfg();
  const FrameSequence clean = make_synthetic_clip(
      SyntheticKind::kRotating, 9, 1, cfg.synth_size, cfg.synth_size, 1);
  const FrameSequence noisy = add_noise(clean, cfg.noise_spec());
  SpatialModel scnn = make_spatial_model(cfg);

  cfg.mode = "scnn3";
  const DenoiseResult r3 = denoise(cfg, noisy, scnn, nullptr);
  cfg.mode = "scnn0";
  const DenoiseResult r0 = denoise(cfg, noisy, scnn, nullptr);
  require_frames_equal(r3.output, r0.output);
}

TEST_CASE("untrained temporal stage passes the spatial estimate through") {
  PipelineConfig cfg = small_cfg();
  cfg.mode = "pacnet";
  const FrameSequence clean = make_synthetic_clip(
      SyntheticKind::kTranslating, 21, 3, cfg.synth_size, cfg.synth_size, 1);
  const FrameSequence noisy = add_noise(clean, cfg.noise_spec());
  SpatialModel scnn = make_spatial_model(cfg);
  TemporalModel tcnn = make_temporal_model(cfg);

  REQUIRE_THROWS_AS(denoise(cfg, noisy, scnn, nullptr), DataError);

  const DenoiseResult r = denoise(cfg, noisy, scnn, &tcnn, &clean);
  // the final 2-D layer starts at zero, so the refiner is an exact pass-through
  require_frames_equal(r.output, r.spatial);

  REQUIRE(r.report.frame_psnr.size() == 3);
  double sum = 0.0;
  for (double v : r.report.frame_psnr) {
    REQUIRE(std::isfinite(v));
    sum += v;
  }
  REQUIRE(r.report.mean_psnr == Catch::Approx(sum / 3.0));
  REQUIRE(r.report.config_text.find("mode = pacnet") != std::string::npos);
}

TEST_CASE("report csv carries psnr but never timings") {
  TempDir td("pacnet-test-reportcsv");
  RunReport r;
  r.frame_psnr = {30.0, 31.5};
  r.mean_psnr = 30.75;
  r.seconds_spatial = 12.5;
  r.cache_hits = 2;
  const fs::path p = td.path / "report.csv";
  write_report_csv(r, p);
  const std::string text = slurp(p);
  REQUIRE(text.rfind("frame,psnr_db\n", 0) == 0);
  REQUIRE(text.find("0,30\n") != std::string::npos);
  REQUIRE(text.find("1,31.5\n") != std::string::npos);
  REQUIRE(text.find("mean,30.75\n") != std::string::npos);
  REQUIRE(text.find("12.5") == std::string::npos);
  REQUIRE(text.find("seconds") == std::string::npos);
}

TEST_CASE("parameter report is self-consistent at both scales") {
  const ParamReport small = param_report(small_cfg());
  REQUIRE(small.scnn_closed == small.scnn_enumerated);
  REQUIRE(small.tcnn_closed == small.tcnn_enumerated);
  REQUIRE(small.total_closed() == small.total_enumerated());

  const ParamReport full = param_report(PipelineConfig{});
  REQUIRE(full.scnn_closed == 1351959);
  REQUIRE(full.tcnn_closed == 1422099);
  REQUIRE(full.total_closed() == 2774058);
  REQUIRE(full.scnn_closed == full.scnn_enumerated);
  REQUIRE(full.tcnn_closed == full.tcnn_enumerated);
  REQUIRE(ParamReport::deviation(full.scnn_closed,
                                 ParamReport::kReferenceScnn) < 0.01);
  REQUIRE(ParamReport::deviation(full.tcnn_closed,
                                 ParamReport::kReferenceTcnn) < 0.10);
  REQUIRE(ParamReport::deviation(full.total_closed(),
                                 ParamReport::kReferenceTotal) < 0.10);

  const std::string text = format_param_report(full);
  REQUIRE(text.find("scnn") != std::string::npos);
  REQUIRE(text.find("tcnn") != std::string::npos);
  REQUIRE(text.find("total") != std::string::npos);
  REQUIRE(text.find("1351959") != std::string::npos);
}

TEST_CASE("translating clips repeat with an exact integer drift") {
  const FrameSequence a =
      make_synthetic_clip(SyntheticKind::kTranslating, 33, 3, 20, 20, 1);
  const FrameSequence b =
      make_synthetic_clip(SyntheticKind::kTranslating, 33, 3, 20, 20, 1);
  require_frames_equal(a, b);

  for (const Tensor& f : a.frames)
    for (std::int64_t i = 0; i < f.size(); ++i) {
      REQUIRE(f[i] >= 0.05f);
      REQUIRE(f[i] <= 0.95f);
    }

  // exactly one shift in [-2,2]^2 maps frame 1 onto frame 0, and it moves
  std::int64_t matches = 0;
  for (std::int64_t dy = -2; dy <= 2; ++dy)
    for (std::int64_t dx = -2; dx <= 2; ++dx) {
      bool all = true;
      bool any = false;
      for (std::int64_t y = 0; y < 20 && all; ++y)
        for (std::int64_t x = 0; x < 20 && all; ++x) {
          const std::int64_t sy = y + dy, sx = x + dx;
          if (sy < 0 || sy >= 20 || sx < 0 || sx >= 20) continue;
          any = true;
          all = a.frames[1].at(0, y, x) == a.frames[0].at(0, sy, sx);
        }
      if (all && any) {
        ++matches;
        REQUIRE((dy != 0 || dx != 0));
      }
    }
  REQUIRE(matches == 1);

  // the corpus is deterministic and clip-indexed
  const FrameSequence c0 = synthetic_corpus_clip(33, 0, 2, 16, 16, 1);
  const FrameSequence c0b = synthetic_corpus_clip(33, 0, 2, 16, 16, 1);
  const FrameSequence c1 = synthetic_corpus_clip(33, 1, 2, 16, 16, 1);
  require_frames_equal(c0, c0b);
  REQUIRE(c0.frames[0][0] != c1.frames[0][0]);
}

TEST_CASE("interior-crop loss masks the border") {
  Tensor pred({1, 4, 5});
  Tensor clean({1, 4, 5});
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    pred[i] = 0.1f * static_cast<float>(i % 7);
    clean[i] = 0.05f * static_cast<float>(i % 5);
  }

  double want = 0.0;
  for (std::int64_t y = 1; y < 3; ++y)
    for (std::int64_t x = 1; x < 4; ++x) {
      const double d = static_cast<double>(pred.at(0, y, x)) -
                       static_cast<double>(clean.at(0, y, x));
      want += d * d;
    }
  want /= 6.0;

  Tensor g;
  const double got = detail::masked_mse(pred, clean, 1, 0.5, &g);
  REQUIRE(got == Catch::Approx(want).epsilon(1e-12));
  REQUIRE(g.same_shape(pred));
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 5; ++x) {
      const bool border = y == 0 || y == 3 || x == 0 || x == 4;
      if (border) {
        REQUIRE(g.at(0, y, x) == 0.0f);
      } else {
        const double d = static_cast<double>(pred.at(0, y, x)) -
                         static_cast<double>(clean.at(0, y, x));
        REQUIRE(g.at(0, y, x) ==
                Catch::Approx(2.0 * d / 6.0 * 0.5).epsilon(1e-6));
      }
    }

  // margin 0 is plain mse; margin that erases the interior is rejected
  Tensor g0;
  const double full = detail::masked_mse(pred, clean, 0, 1.0, &g0);
  REQUIRE(full == Catch::Approx(ops::mse_loss(pred, clean)).epsilon(1e-12));
  REQUIRE_THROWS_AS(detail::masked_mse(pred, clean, 2, 1.0, nullptr),
                    DataError);
}

TEST_CASE("sequence content hash tracks the pixel data") {
  const FrameSequence a =
      make_synthetic_clip(SyntheticKind::kRotating, 4, 2, 12, 12, 1);
  FrameSequence b = a;
  REQUIRE(sequence_content_hash(a) == sequence_content_hash(b));
  b.frames[1][17] += 0.25f;
  REQUIRE(sequence_content_hash(a) != sequence_content_hash(b));
}
