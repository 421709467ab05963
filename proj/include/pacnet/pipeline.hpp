#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "pacnet/checkpoint.hpp"
#include "pacnet/common.hpp"
#include "pacnet/config.hpp"
#include "pacnet/frame_sequence.hpp"
#include "pacnet/metrics.hpp"
#include "pacnet/noise.hpp"
#include "pacnet/patch_craft.hpp"
#include "pacnet/rng.hpp"
#include "pacnet/scnn.hpp"
#include "pacnet/synthetic.hpp"
#include "pacnet/tcnn.hpp"
#include "pacnet/tensor_io.hpp"

namespace pacnet {

// ---------------------------------------------------------------------------
// Model bundles. The bank owns the parameters; the net holds pointers into
// it, which stay valid under moves because the bank stores entries on the
// heap. Banks are non-copyable, so a bundle cannot be copied by accident.
// ---------------------------------------------------------------------------

struct SpatialModel {
  ParamBank bank;
  ScnnModel net;
};

struct TemporalModel {
  ParamBank bank;
  TcnnModel net;
};

inline SpatialModel make_spatial_model(const PipelineConfig& cfg) {
  SpatialModel m;
  m.net = make_scnn(m.bank, cfg.scnn_config(), rng::derive(cfg.seed, "scnn-init"));
  return m;
}

inline TemporalModel make_temporal_model(const PipelineConfig& cfg) {
  TemporalModel m;
  m.net = make_tcnn(m.bank, cfg.tcnn_config(), rng::derive(cfg.seed, "tcnn-init"));
  return m;
}

namespace detail {

// BatchNorm layers in block order, paired with their owning block index.
template <typename Fn>
void for_each_bn(ScnnModel& net, Fn&& fn) {
  std::size_t bn_index = 0;
  for (std::int64_t b = 0; b < net.cfg.blocks; ++b)
    if (net.cfg.has_bn(b)) fn(b, net.bns[bn_index++]);
}

inline void check_checkpoint_architecture(const Checkpoint& cp,
                                          const PipelineConfig& cfg,
                                          const std::string& net_kind) {
  nlohmann::json expected = config_architecture_json(cfg);
  expected["net"] = net_kind;
  if (cp.config != expected)
    throw DataError(cat("checkpoint does not match the configured ",
                        net_kind, " architecture\n  checkpoint: ",
                        cp.config.dump(), "\n  config:     ",
                        expected.dump()));
}

}  // namespace detail

inline void save_spatial_checkpoint(SpatialModel& m, const PipelineConfig& cfg,
                                    std::int64_t step,
                                    const std::filesystem::path& dir) {
  Checkpoint cp;
  cp.config = config_architecture_json(cfg);
  cp.config["net"] = "scnn";
  cp.step = step;
  bank_to_checkpoint(m.bank, cp);
  detail::for_each_bn(m.net, [&](std::int64_t b, BatchNormLayer& bn) {
    const std::string prefix = cat("scnn.block", b, ".bn");
    cp.put(prefix + ".running_mean", bn.running_mean);
    cp.put(prefix + ".running_var", bn.running_var);
  });
  save_checkpoint(cp, dir);
}

// Architecture mismatch is rejected here, before any tensor is copied.
inline std::int64_t load_spatial_checkpoint(SpatialModel& m,
                                            const PipelineConfig& cfg,
                                            const std::filesystem::path& dir) {
  const Checkpoint cp = load_checkpoint(dir);
  detail::check_checkpoint_architecture(cp, cfg, "scnn");
  bank_from_checkpoint(m.bank, cp);
  detail::for_each_bn(m.net, [&](std::int64_t b, BatchNormLayer& bn) {
    const std::string prefix = cat("scnn.block", b, ".bn");
    const Tensor& mean = cp.get(prefix + ".running_mean");
    const Tensor& var = cp.get(prefix + ".running_var");
    require(mean.shape() == bn.running_mean.shape() &&
                var.shape() == bn.running_var.shape(),
            "running statistics shape mismatch in ", prefix);
    bn.running_mean = mean;
    bn.running_var = var;
  });
  return cp.step;
}

inline void save_temporal_checkpoint(TemporalModel& m,
                                     const PipelineConfig& cfg,
                                     std::int64_t step,
                                     const std::filesystem::path& dir) {
  Checkpoint cp;
  cp.config = config_architecture_json(cfg);
  cp.config["net"] = "tcnn";
  cp.step = step;
  bank_to_checkpoint(m.bank, cp);
  save_checkpoint(cp, dir);
}

inline std::int64_t load_temporal_checkpoint(TemporalModel& m,
                                             const PipelineConfig& cfg,
                                             const std::filesystem::path& dir) {
  const Checkpoint cp = load_checkpoint(dir);
  detail::check_checkpoint_architecture(cp, cfg, "tcnn");
  bank_from_checkpoint(m.bank, cp);
  return cp.step;
}

// ---------------------------------------------------------------------------
// Augmentation cache. The search stage dominates runtime, so augmented
// inputs are memoized on disk keyed by the input content and the search
// geometry. Every entry carries a sidecar content hash that is verified
// before the entry is trusted.
// ---------------------------------------------------------------------------

inline std::string sequence_content_hash(const FrameSequence& seq) {
  std::string acc;
  for (const Tensor& frame : seq.frames) {
    const std::string blob = serialize_tensor(frame);
    acc += hex64(fnv1a64(blob));
  }
  return hex64(fnv1a64(acc));
}

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open for reading: ", path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  require(in.good() || in.eof(), "read failed: ", path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: ", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), "write failed: ", path.string());
}

}  // namespace detail

// Computes (or recalls) the augmented input for frame t0. `seq_hash` lets
// callers that touch many frames hash the sequence once; pass empty to have
// it computed here. An empty cache_dir or cfg.cache=false disables caching.
inline Tensor cached_augment(const FrameSequence& seq, std::int64_t t0,
                             const PipelineConfig& cfg,
                             const std::filesystem::path& cache_dir = {},
                             const std::string& seq_hash = {},
                             bool* cache_hit = nullptr) {
  if (cache_hit) *cache_hit = false;
  if (cache_dir.empty() || !cfg.cache)
    return augment_frame(seq, t0, cfg.patch_spec(), cfg.search_window(),
                         cfg.n);
  const std::string content =
      seq_hash.empty() ? sequence_content_hash(seq) : seq_hash;
  const std::string key =
      cat(content, ":", t0, ":", cfg.sqrtF, ":", cfg.sqrtf, ":", cfg.B, ":",
          cfg.effective_Ts(), ":", cfg.n, ":", cfg.channels);
  const std::string stem = cat("aug-", hex64(fnv1a64(key)));
  const auto tensor_path = cache_dir / (stem + ".pct1");
  const auto hash_path = cache_dir / (stem + ".hash");
  if (std::filesystem::exists(tensor_path) &&
      std::filesystem::exists(hash_path)) {
    const std::string blob = detail::read_file_bytes(tensor_path);
    std::string stored = detail::read_file_bytes(hash_path);
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
      stored.pop_back();
    const std::string actual = hex64(fnv1a64(blob));
    if (actual != stored)
      throw DataError(cat("cache entry ", tensor_path.string(),
                          " is corrupted: content hash ", actual,
                          " does not match recorded ", stored));
    if (cache_hit) *cache_hit = true;
    return deserialize_tensor(blob, tensor_path.string());
  }
  Tensor aug = augment_frame(seq, t0, cfg.patch_spec(), cfg.search_window(),
                             cfg.n);
  std::filesystem::create_directories(cache_dir);
  const std::string blob = serialize_tensor(aug);
  detail::write_file_bytes(tensor_path, blob);
  detail::write_file_bytes(hash_path, hex64(fnv1a64(blob)) + "\n");
  return aug;
}

// ---------------------------------------------------------------------------
// Denoising. Per frame: neighbor search + patch stitching -> spatial
// network; in pacnet mode a temporal pass then runs over sliding windows of
// the spatial outputs (edge frames replicated to fill boundary windows).
// ---------------------------------------------------------------------------

struct RunReport {
  std::vector<double> frame_psnr;  // empty when no reference was supplied
  double mean_psnr = std::numeric_limits<double>::quiet_NaN();
  double seconds_augment = 0.0;
  double seconds_spatial = 0.0;
  double seconds_temporal = 0.0;
  std::int64_t cache_hits = 0;
  std::string config_text;
};

struct DenoiseResult {
  FrameSequence output;
  FrameSequence spatial;  // intermediate estimate; equals output below pacnet
  RunReport report;
};

inline DenoiseResult denoise(const PipelineConfig& cfg,
                             const FrameSequence& noisy, SpatialModel& scnn,
                             TemporalModel* tcnn,
                             const FrameSequence* reference = nullptr,
                             const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  noisy.validate();
  require(cfg.mode != "pacnet" || tcnn != nullptr,
          "pacnet mode needs a temporal model (use mode scnn3 or scnn0 to "
          "run without one)");
  using clock = std::chrono::steady_clock;
  const auto elapsed = [](clock::time_point from) {
    return std::chrono::duration<double>(clock::now() - from).count();
  };

  DenoiseResult res;
  res.report.config_text = config_echo(cfg);
  const std::int64_t frames = noisy.frame_count();
  const std::string seq_hash =
      cache_dir.empty() || !cfg.cache ? std::string()
                                      : sequence_content_hash(noisy);
  for (std::int64_t t = 0; t < frames; ++t) {
    auto t_aug = clock::now();
    bool hit = false;
    const Tensor aug = cached_augment(noisy, t, cfg, cache_dir, seq_hash, &hit);
    res.report.seconds_augment += elapsed(t_aug);
    if (hit) ++res.report.cache_hits;
    auto t_sp = clock::now();
    res.spatial.frames.push_back(scnn_forward_single(scnn.net, aug));
    res.report.seconds_spatial += elapsed(t_sp);
  }

  if (cfg.mode == "pacnet") {
    const std::int64_t Tt = cfg.tcnn_Tt;
    auto t_tm = clock::now();
    for (std::int64_t t = 0; t < frames; ++t) {
      std::vector<Tensor> yw, yhw;
      for (std::int64_t k = -Tt; k <= Tt; ++k) {
        const std::int64_t idx =
            std::min(frames - 1, std::max<std::int64_t>(0, t + k));
        yw.push_back(noisy.frames[static_cast<std::size_t>(idx)]);
        yhw.push_back(res.spatial.frames[static_cast<std::size_t>(idx)]);
      }
      res.output.frames.push_back(tcnn_forward(tcnn->net, yw, yhw));
    }
    res.report.seconds_temporal = elapsed(t_tm);
  } else {
    res.output = res.spatial;
  }

  if (reference) {
    res.report.frame_psnr = per_frame_psnr(*reference, res.output);
    double sum = 0.0;
    for (double v : res.report.frame_psnr) sum += v;
    res.report.mean_psnr =
        sum / static_cast<double>(res.report.frame_psnr.size());
  }
  return res;
}

inline std::string format_run_report(const RunReport& r) {
  std::ostringstream out;
  if (!r.frame_psnr.empty()) {
    out << "frame  psnr_db\n";
    for (std::size_t i = 0; i < r.frame_psnr.size(); ++i)
      out << "  " << i << "    " << r.frame_psnr[i] << "\n";
    out << "mean   " << r.mean_psnr << "\n";
  }
  out << "stage seconds: augment " << r.seconds_augment << ", spatial "
      << r.seconds_spatial << ", temporal " << r.seconds_temporal
      << " (cache hits: " << r.cache_hits << ")\n";
  return out.str();
}

// Timings never enter the CSV so artifact bytes depend only on the inputs.
inline void write_report_csv(const RunReport& r,
                             const std::filesystem::path& path) {
  std::ostringstream out;
  out << "frame,psnr_db\n";
  for (std::size_t i = 0; i < r.frame_psnr.size(); ++i)
    out << i << "," << r.frame_psnr[i] << "\n";
  out << "mean," << r.mean_psnr << "\n";
  detail::write_file_bytes(path, out.str());
}

// ---------------------------------------------------------------------------
// Parameter report: closed-form per-layer breakdown next to counts
// enumerated from an instantiated model, plus deviation from the reference
// sizes of the default configuration.
// ---------------------------------------------------------------------------

struct ParamReportLine {
  std::string name;
  std::string formula;
  std::int64_t count = 0;
};

struct ParamReport {
  std::vector<ParamReportLine> lines;
  std::int64_t scnn_closed = 0, scnn_enumerated = 0;
  std::int64_t tcnn_closed = 0, tcnn_enumerated = 0;

  std::int64_t total_closed() const { return scnn_closed + tcnn_closed; }
  std::int64_t total_enumerated() const {
    return scnn_enumerated + tcnn_enumerated;
  }

  // Reference sizes for the default configuration.
  static constexpr double kReferenceScnn = 1.34e6;
  static constexpr double kReferenceTcnn = 1.53e6;
  static constexpr double kReferenceTotal = 2.87e6;

  static double deviation(std::int64_t count, double reference) {
    return std::abs(static_cast<double>(count) - reference) / reference;
  }
};

inline ParamReport param_report(const PipelineConfig& cfg) {
  cfg.validate();
  ParamReport rep;

  const ScnnConfig sc = cfg.scnn_config();
  for (const auto& [b, g] : [&] {
    std::vector<std::pair<std::int64_t, SepConvConfig>> v;
    const auto cfgs = sc.layer_configs();
    for (std::size_t i = 0; i < cfgs.size(); ++i)
      v.emplace_back(static_cast<std::int64_t>(i), cfgs[i]);
    return v;
  }()) {
    const std::int64_t vh = g.n_in * g.f_in * (g.c * g.c * g.m * g.m + g.c);
    const std::int64_t fw = g.n_in * (g.c * g.c * g.f_in * g.f_out + g.c * g.f_out);
    const std::int64_t nw = g.f_out * g.c * (g.n_in * g.n_out + g.n_out);
    ParamReportLine line;
    line.name = cat("scnn.block", b);
    line.formula = cat("vh ", g.n_in, "*", g.f_in, "*(", g.c, "^2*", g.m,
                       "^2+", g.c, ")=", vh, "  f ", g.n_in, "*(", g.c, "^2*",
                       g.f_in, "*", g.f_out, "+", g.c, "*", g.f_out, ")=", fw,
                       "  n ", g.f_out, "*", g.c, "*(", g.n_in, "*", g.n_out,
                       "+", g.n_out, ")=", nw);
    line.count = vh + fw + nw;
    rep.lines.push_back(line);
    rep.scnn_closed += line.count;
    if (sc.has_bn(b)) {
      const std::int64_t ch = g.n_out * g.f_out * g.c;
      ParamReportLine bn;
      bn.name = cat("scnn.block", b, ".bn");
      bn.formula = cat("2*", ch);
      bn.count = 2 * ch;
      rep.lines.push_back(bn);
      rep.scnn_closed += bn.count;
    }
  }

  const TcnnConfig tc = cfg.tcnn_config();
  for (std::int64_t l = 0; l < tc.Tt; ++l) {
    const std::int64_t cin = l == 0 ? 2 * tc.c : tc.ch3d;
    ParamReportLine line;
    line.name = cat("tcnn.conv3d", l);
    line.formula = cat(tc.ch3d, "*", cin, "*27+", tc.ch3d);
    line.count = tc.ch3d * cin * 27 + tc.ch3d;
    rep.lines.push_back(line);
    rep.tcnn_closed += line.count;
  }
  for (std::int64_t l = 0; l < tc.layers2d; ++l) {
    const std::int64_t cin = l == 0 ? tc.ch3d : tc.ch2d;
    const std::int64_t cout = l == tc.layers2d - 1 ? tc.c : tc.ch2d;
    ParamReportLine line;
    line.name = cat("tcnn.conv2d", l);
    line.formula = cat(cout, "*", cin, "*9+", cout);
    line.count = cout * cin * 9 + cout;
    rep.lines.push_back(line);
    rep.tcnn_closed += line.count;
  }

  {
    ParamBank bank;
    make_scnn(bank, sc, 0);
    rep.scnn_enumerated = bank.total_parameter_count();
  }
  {
    ParamBank bank;
    make_tcnn(bank, tc, 0);
    rep.tcnn_enumerated = bank.total_parameter_count();
  }
  return rep;
}

inline std::string format_param_report(const ParamReport& rep) {
  std::ostringstream out;
  for (const auto& line : rep.lines)
    out << line.name << "  " << line.count << "  [" << line.formula << "]\n";
  out << "scnn  closed-form " << rep.scnn_closed << "  enumerated "
      << rep.scnn_enumerated << "  deviation from "
      << static_cast<std::int64_t>(ParamReport::kReferenceScnn) << ": "
      << 100.0 * ParamReport::deviation(rep.scnn_closed,
                                        ParamReport::kReferenceScnn)
      << "%\n";
  out << "tcnn  closed-form " << rep.tcnn_closed << "  enumerated "
      << rep.tcnn_enumerated << "  deviation from "
      << static_cast<std::int64_t>(ParamReport::kReferenceTcnn) << ": "
      << 100.0 * ParamReport::deviation(rep.tcnn_closed,
                                        ParamReport::kReferenceTcnn)
      << "%\n";
  out << "total closed-form " << rep.total_closed() << "  enumerated "
      << rep.total_enumerated() << "  deviation from "
      << static_cast<std::int64_t>(ParamReport::kReferenceTotal) << ": "
      << 100.0 * ParamReport::deviation(rep.total_closed(),
                                        ParamReport::kReferenceTotal)
      << "%\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Training. Synthetic corpora, interior-crop MSE, deterministic batch
// sampling, per-epoch checkpoints, and a loss curve per run.
// ---------------------------------------------------------------------------

struct LossPoint {
  std::int64_t step = 0;
  double mse = 0.0;
  double psnr_db = 0.0;  // of the loss crop: -10*log10(mse)
};

inline void write_loss_csv(const std::vector<LossPoint>& curve,
                           const std::filesystem::path& path) {
  std::ostringstream out;
  out << "step,mse,psnr_db\n";
  for (const auto& p : curve)
    out << p.step << "," << p.mse << "," << p.psnr_db << "\n";
  detail::write_file_bytes(path, out.str());
}

inline std::vector<FrameSequence> synthetic_corpus(std::uint64_t seed,
                                                   std::int64_t count,
                                                   std::int64_t frames,
                                                   std::int64_t size,
                                                   std::int64_t channels,
                                                   bool translating_only = false) {
  std::vector<FrameSequence> clips;
  clips.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k)
    clips.push_back(
        translating_only
            ? make_synthetic_clip(SyntheticKind::kTranslating,
                                  rng::derive(seed, 0xC11F000 + k), frames,
                                  size, size, channels)
            : synthetic_corpus_clip(seed, k, frames, size, size, channels));
  return clips;
}

inline std::vector<FrameSequence> training_corpus(const PipelineConfig& cfg) {
  return synthetic_corpus(rng::derive(cfg.seed, "train-corpus"),
                          cfg.synth_train_clips, cfg.synth_frames,
                          cfg.synth_size, cfg.channels);
}

// Held-out clips all carry integer-velocity motion so other frames contain
// exact copies of every interior patch; the multi-frame modes have real
// signal to exploit.
inline std::vector<FrameSequence> holdout_corpus(const PipelineConfig& cfg) {
  return synthetic_corpus(rng::derive(cfg.seed, "holdout-corpus"),
                          cfg.synth_holdout_clips, cfg.synth_frames,
                          cfg.synth_size, cfg.channels,
                          /*translating_only=*/true);
}

// Noise is fixed per clip (not resampled per step): the seed is derived from
// the run seed and the clip index only.
inline FrameSequence clip_noise(const PipelineConfig& cfg,
                                const FrameSequence& clean, std::int64_t k) {
  NoiseSpec ns = cfg.noise_spec();
  ns.seed = rng::derive(rng::derive(cfg.seed, "clip-noise"), k);
  return add_noise(clean, ns);
}

namespace detail {

// MSE over the interior crop (margin pixels stripped from every side) and,
// when dpred is given, its gradient scaled by `grad_scale` (the caller folds
// in the 1/batch factor). Border entries of dpred are zeroed.
inline double masked_mse(const Tensor& pred, const Tensor& clean,
                         std::int64_t margin, double grad_scale,
                         Tensor* dpred) {
  require(pred.rank() == 3 && pred.same_shape(clean),
          "loss operands must be matching (c,h,w) tensors");
  const std::int64_t c = pred.dim(0), h = pred.dim(1), w = pred.dim(2);
  require(2 * margin < h && 2 * margin < w, "loss margin ",
          std::to_string(margin), " leaves no interior in ",
          pred.shape_string());
  const std::int64_t ih = h - 2 * margin, iw = w - 2 * margin;
  const double inv_n = 1.0 / static_cast<double>(c * ih * iw);
  if (dpred) {
    *dpred = Tensor(pred.shape());
  }
  double acc = 0.0;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = margin; y < h - margin; ++y)
      for (std::int64_t x = margin; x < w - margin; ++x) {
        const double diff = static_cast<double>(pred.at(ch, y, x)) -
                            static_cast<double>(clean.at(ch, y, x));
        acc += diff * diff;
        if (dpred)
          dpred->at(ch, y, x) =
              static_cast<float>(2.0 * diff * inv_n * grad_scale);
      }
  return acc * inv_n;
}

struct SampleRef {
  std::int64_t clip = 0;
  std::int64_t frame = 0;
};

inline std::vector<SampleRef> sample_pool(
    const std::vector<FrameSequence>& clips) {
  std::vector<SampleRef> pool;
  for (std::size_t k = 0; k < clips.size(); ++k)
    for (std::int64_t t = 0; t < clips[k].frame_count(); ++t)
      pool.push_back({static_cast<std::int64_t>(k), t});
  return pool;
}

inline void maybe_save_epoch(const std::filesystem::path& out_dir,
                             std::int64_t step, std::int64_t epoch_steps,
                             std::int64_t total_steps, auto&& save) {
  if (out_dir.empty()) return;
  if (step % epoch_steps == 0)
    save(out_dir / cat("epoch-", step / epoch_steps));
  if (step == total_steps) save(out_dir / "final");
}

}  // namespace detail

// Trains the spatial network in place. Augmented inputs for all clip frames
// are precomputed (and cached when cache_dir is set); batches are drawn
// deterministically from (seed, step, slot). Emits per-epoch checkpoints
// plus `final/` and `loss.csv` under out_dir unless it is empty.
inline std::vector<LossPoint> train_spatial(
    const PipelineConfig& cfg, const std::vector<FrameSequence>& clean_clips,
    SpatialModel& model, const std::filesystem::path& out_dir = {},
    const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  require(!clean_clips.empty(), "training needs at least one clip");
  const std::int64_t n_clips = static_cast<std::int64_t>(clean_clips.size());

  std::vector<std::vector<Tensor>> augs(static_cast<std::size_t>(n_clips));
  std::vector<FrameSequence> noisy;
  for (std::int64_t k = 0; k < n_clips; ++k) {
    noisy.push_back(clip_noise(cfg, clean_clips[static_cast<std::size_t>(k)], k));
    const std::string seq_hash = cache_dir.empty() || !cfg.cache
                                     ? std::string()
                                     : sequence_content_hash(noisy.back());
    for (std::int64_t t = 0; t < noisy.back().frame_count(); ++t)
      augs[static_cast<std::size_t>(k)].push_back(
          cached_augment(noisy.back(), t, cfg, cache_dir, seq_hash));
  }

  const auto pool = detail::sample_pool(clean_clips);
  const std::uint64_t batch_seed = rng::derive(cfg.seed, "spatial-batch");
  const OptimizerSpec opt = cfg.optimizer_spec(false);
  const std::int64_t steps = cfg.train_steps_spatial;
  std::vector<LossPoint> curve;
  curve.reserve(static_cast<std::size_t>(steps));

  for (std::int64_t step = 1; step <= steps; ++step) {
    std::vector<Tensor> batch;
    std::vector<const Tensor*> targets;
    for (std::int64_t i = 0; i < cfg.train_batch; ++i) {
      const auto& s = pool[rng::below(batch_seed,
                                      static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(i),
                                      pool.size())];
      batch.push_back(augs[static_cast<std::size_t>(s.clip)]
                          [static_cast<std::size_t>(s.frame)]);
      targets.push_back(&clean_clips[static_cast<std::size_t>(s.clip)]
                             .frames[static_cast<std::size_t>(s.frame)]);
    }

    model.bank.zero_grad();
    ScnnBatchContext ctx;
    const std::vector<Tensor> yhat =
        scnn_forward_batch(model.net, batch, /*training=*/true, &ctx);
    std::vector<Tensor> d_yhat(yhat.size());
    double mse = 0.0;
    for (std::size_t s = 0; s < yhat.size(); ++s)
      mse += detail::masked_mse(yhat[s], *targets[s], cfg.loss_margin,
                                1.0 / static_cast<double>(yhat.size()),
                                &d_yhat[s]);
    mse /= static_cast<double>(yhat.size());
    if (!std::isfinite(mse))
      throw NumericError(cat("non-finite training loss at spatial step ",
                             step, " (mse=", mse, ")"));
    scnn_backward_batch(model.net, ctx, d_yhat);
    optimizer_step(model.bank, opt, step, (step - 1) / cfg.epoch_steps);
    curve.push_back({step, mse, -10.0 * std::log10(mse)});
    detail::maybe_save_epoch(out_dir, step, cfg.epoch_steps, steps,
                             [&](const std::filesystem::path& dir) {
                               save_spatial_checkpoint(model, cfg, step, dir);
                             });
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    if (steps == 0) save_spatial_checkpoint(model, cfg, 0, out_dir / "final");
    write_loss_csv(curve, out_dir / "loss.csv");
  }
  return curve;
}

// Trains the temporal network against the frozen spatial model: spatial
// outputs are produced once in eval mode, and the spatial bank is never
// touched (separate banks make that structural). Window samples replicate
// edge frames, matching inference.
inline std::vector<LossPoint> train_temporal(
    const PipelineConfig& cfg, const std::vector<FrameSequence>& clean_clips,
    SpatialModel& scnn, TemporalModel& model,
    const std::filesystem::path& out_dir = {},
    const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  require(!clean_clips.empty(), "training needs at least one clip");
  const std::int64_t n_clips = static_cast<std::int64_t>(clean_clips.size());

  std::vector<FrameSequence> noisy;
  std::vector<std::vector<Tensor>> yhats(static_cast<std::size_t>(n_clips));
  for (std::int64_t k = 0; k < n_clips; ++k) {
    noisy.push_back(clip_noise(cfg, clean_clips[static_cast<std::size_t>(k)], k));
    const std::string seq_hash = cache_dir.empty() || !cfg.cache
                                     ? std::string()
                                     : sequence_content_hash(noisy.back());
    for (std::int64_t t = 0; t < noisy.back().frame_count(); ++t) {
      const Tensor aug =
          cached_augment(noisy.back(), t, cfg, cache_dir, seq_hash);
      yhats[static_cast<std::size_t>(k)].push_back(
          scnn_forward_single(scnn.net, aug));
    }
  }

  const auto pool = detail::sample_pool(clean_clips);
  const std::uint64_t batch_seed = rng::derive(cfg.seed, "temporal-batch");
  const OptimizerSpec opt = cfg.optimizer_spec(true);
  const std::int64_t steps = cfg.train_steps_temporal;
  const std::int64_t Tt = cfg.tcnn_Tt;
  std::vector<LossPoint> curve;
  curve.reserve(static_cast<std::size_t>(steps));

  for (std::int64_t step = 1; step <= steps; ++step) {
    model.bank.zero_grad();
    double mse = 0.0;
    for (std::int64_t i = 0; i < cfg.train_batch; ++i) {
      const auto& s = pool[rng::below(batch_seed,
                                      static_cast<std::uint64_t>(step),
                                      static_cast<std::uint64_t>(i),
                                      pool.size())];
      const auto& clip_noisy = noisy[static_cast<std::size_t>(s.clip)];
      const auto& clip_yhat = yhats[static_cast<std::size_t>(s.clip)];
      const std::int64_t frames = clip_noisy.frame_count();
      std::vector<Tensor> yw, yhw;
      for (std::int64_t k = -Tt; k <= Tt; ++k) {
        const std::int64_t idx =
            std::min(frames - 1, std::max<std::int64_t>(0, s.frame + k));
        yw.push_back(clip_noisy.frames[static_cast<std::size_t>(idx)]);
        yhw.push_back(clip_yhat[static_cast<std::size_t>(idx)]);
      }
      TcnnContext tctx;
      const Tensor xhat = tcnn_forward(model.net, yw, yhw, &tctx);
      Tensor d_xhat;
      mse += detail::masked_mse(
          xhat,
          clean_clips[static_cast<std::size_t>(s.clip)]
              .frames[static_cast<std::size_t>(s.frame)],
          cfg.loss_margin, 1.0 / static_cast<double>(cfg.train_batch),
          &d_xhat);
      tcnn_backward(model.net, tctx, d_xhat);
    }
    mse /= static_cast<double>(cfg.train_batch);
    if (!std::isfinite(mse))
      throw NumericError(cat("non-finite training loss at temporal step ",
                             step, " (mse=", mse, ")"));
    optimizer_step(model.bank, opt, step, (step - 1) / cfg.epoch_steps);
    curve.push_back({step, mse, -10.0 * std::log10(mse)});
    detail::maybe_save_epoch(out_dir, step, cfg.epoch_steps, steps,
                             [&](const std::filesystem::path& dir) {
                               save_temporal_checkpoint(model, cfg, step, dir);
                             });
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    if (steps == 0) save_temporal_checkpoint(model, cfg, 0, out_dir / "final");
    write_loss_csv(curve, out_dir / "loss.csv");
  }
  return curve;
}

}  // namespace pacnet
