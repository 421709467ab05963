#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/ops.hpp"
#include "pacnet/optimizer.hpp"
#include "pacnet/sepconv.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Spatial denoiser: `blocks` SepConv stages with ceil-halving of the neighbor
// axis. Block 0: SepConv+ReLU. Middle blocks: SepConv+BN+ReLU. Final block:
// SepConv only, collapsing the patch axis to 1. The network predicts the
// noise z_s; the estimate is the frame copy minus z_s.
struct ScnnConfig {
  std::int64_t n1 = 15;  // neighbor slots including the frame copy
  std::int64_t f1 = 50;  // offset groups plus the score-map slot
  std::int64_t c = 3;
  std::int64_t m = 7;
  std::int64_t blocks = 5;

  void validate() const {
    require(n1 >= 1 && f1 >= 1 && c >= 1, "scnn dims must be >= 1");
    require(m >= 1 && m % 2 == 1, "scnn m must be odd");
    require(blocks >= 2, "scnn needs at least 2 blocks");
    std::int64_t n = n1;
    for (std::int64_t b = 0; b < blocks; ++b) n = (n + 1) / 2;
    require(n == 1, "neighbor schedule does not reach 1 in ",
            std::to_string(blocks), " blocks from n=", std::to_string(n1));
  }

  std::vector<SepConvConfig> layer_configs() const {
    validate();
    std::vector<SepConvConfig> cfgs;
    std::int64_t n = n1;
    for (std::int64_t b = 0; b < blocks; ++b) {
      SepConvConfig g;
      g.n_in = n;
      g.n_out = (n + 1) / 2;
      g.f_in = f1;
      g.f_out = (b == blocks - 1) ? 1 : f1;
      g.c = c;
      g.m = m;
      cfgs.push_back(g);
      n = g.n_out;
    }
    return cfgs;
  }

  bool has_bn(std::int64_t block) const {
    return block >= 1 && block <= blocks - 2;
  }
};

struct BatchNormLayer {
  std::string name;
  std::int64_t channels = 0;
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Tensor running_mean;  // not trainable, checkpointed alongside parameters
  Tensor running_var;
};

inline BatchNormLayer make_batchnorm_layer(ParamBank& bank,
                                           const std::string& name,
                                           std::int64_t channels) {
  BatchNormLayer bn;
  bn.name = name;
  bn.channels = channels;
  bn.gamma = bank.add(name + ".gamma", Tensor({channels}, 1.0f));
  bn.beta = bank.add(name + ".beta", Tensor({channels}));
  bn.running_mean = Tensor({channels}, 0.0f);
  bn.running_var = Tensor({channels}, 1.0f);
  return bn;
}

struct ScnnModel {
  ScnnConfig cfg;
  std::vector<SepConvLayer> layers;
  std::vector<BatchNormLayer> bns;  // one per middle block, in block order
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

// Affine BN parameters included; running statistics are not trainable.
inline std::int64_t scnn_param_count(const ScnnConfig& cfg) {
  std::int64_t total = 0;
  const auto cfgs = cfg.layer_configs();
  for (std::size_t b = 0; b < cfgs.size(); ++b) {
    total += sepconv_param_count(cfgs[b]);
    if (cfg.has_bn(static_cast<std::int64_t>(b)))
      total += 2 * cfgs[b].n_out * cfgs[b].f_out * cfgs[b].c;
  }
  return total;
}

inline ScnnModel make_scnn(ParamBank& bank, const ScnnConfig& cfg,
                           std::uint64_t seed) {
  ScnnModel model;
  model.cfg = cfg;
  const auto cfgs = cfg.layer_configs();
  for (std::size_t b = 0; b < cfgs.size(); ++b) {
    const std::string prefix = "scnn.block" + std::to_string(b);
    model.layers.push_back(make_sepconv_layer(
        bank, prefix, cfgs[b], rng::derive(seed, prefix.c_str())));
    if (cfg.has_bn(static_cast<std::int64_t>(b)))
      model.bns.push_back(make_batchnorm_layer(
          bank, prefix + ".bn", cfgs[b].n_out * cfgs[b].f_out * cfgs[b].c));
  }
  return model;
}

// The frame copy y: neighbor slot 0, offset slot 0 — the leading (c,v,h)
// block of the augmented tensor.
inline Tensor frame_copy_slice(const Tensor& aug) {
  require(aug.rank() == 5, "augmented input must be rank 5, got ",
          aug.shape_string());
  Tensor y({aug.dim(2), aug.dim(3), aug.dim(4)});
  std::copy(aug.data(), aug.data() + y.size(), y.data());
  return y;
}

struct ScnnBlockContext {
  std::vector<Tensor> inputs;              // per sample, input to the block
  std::vector<SepConvContext<float>> sep;  // per sample
  std::vector<Tensor> sep_out;             // per sample, pre-BN
  std::vector<Tensor> pre_act;             // per sample, input to ReLU
  ops::BatchNormContext<float> bn;
};

struct ScnnBatchContext {
  std::vector<ScnnBlockContext> blocks;
};

// Batch-synchronous forward: BN statistics pool over every sample, so the
// whole batch advances one block at a time. Returns y-hat per sample.
inline std::vector<Tensor> scnn_forward_batch(ScnnModel& model,
                                              const std::vector<Tensor>& augs,
                                              bool training,
                                              ScnnBatchContext* ctx) {
  require(!augs.empty(), "scnn forward needs at least one sample");
  const std::int64_t batch = static_cast<std::int64_t>(augs.size());
  std::vector<Tensor> cur = augs;
  if (ctx) ctx->blocks.assign(static_cast<std::size_t>(model.cfg.blocks), {});
  std::size_t bn_index = 0;
  for (std::int64_t b = 0; b < model.cfg.blocks; ++b) {
    ScnnBlockContext* bc =
        ctx ? &ctx->blocks[static_cast<std::size_t>(b)] : nullptr;
    if (bc) {
      bc->inputs = cur;
      bc->sep.resize(static_cast<std::size_t>(batch));
    }
    std::vector<Tensor> next;
    next.reserve(static_cast<std::size_t>(batch));
    for (std::int64_t s = 0; s < batch; ++s)
      next.push_back(sepconv_forward(
          cur[static_cast<std::size_t>(s)],
          model.layers[static_cast<std::size_t>(b)],
          bc ? &bc->sep[static_cast<std::size_t>(s)] : nullptr));
    if (model.cfg.has_bn(b)) {
      if (bc) bc->sep_out = next;
      BatchNormLayer& bn = model.bns[bn_index++];
      std::vector<const Tensor*> ptrs;
      for (const Tensor& t : next) ptrs.push_back(&t);
      next = ops::batchnorm_forward(
          ptrs, bn.channels, bn.gamma->value, bn.beta->value, bn.running_mean,
          bn.running_var, training, model.bn_momentum, model.bn_eps,
          bc ? &bc->bn : nullptr);
    }
    if (b < model.cfg.blocks - 1) {
      if (bc) bc->pre_act = next;
      for (Tensor& t : next) t = ops::relu(t);
    }
    cur = std::move(next);
  }
  std::vector<Tensor> yhat;
  yhat.reserve(static_cast<std::size_t>(batch));
  for (std::int64_t s = 0; s < batch; ++s) {
    const Tensor& zs = cur[static_cast<std::size_t>(s)];
    require(zs.dim(0) == 1 && zs.dim(1) == 1,
            "scnn output must be (1,1,c,v,h), got ", zs.shape_string());
    Tensor y = frame_copy_slice(augs[static_cast<std::size_t>(s)]);
    Tensor out(y.shape());
    for (std::int64_t i = 0; i < y.size(); ++i) out[i] = y[i] - zs[i];
    yhat.push_back(std::move(out));
  }
  return yhat;
}

inline Tensor scnn_forward_single(ScnnModel& model, const Tensor& aug) {
  std::vector<Tensor> augs{aug};
  return scnn_forward_batch(model, augs, false, nullptr)[0];
}

// Accumulates parameter gradients for the whole batch. d_yhat is the loss
// gradient w.r.t. y-hat per sample; the frame-copy path of the residual is
// data, so only the -z_s branch propagates. Samples are folded into the
// shared gradients in index order, keeping accumulation deterministic.
inline void scnn_backward_batch(ScnnModel& model, ScnnBatchContext& ctx,
                                const std::vector<Tensor>& d_yhat) {
  const std::int64_t batch = static_cast<std::int64_t>(d_yhat.size());
  require(static_cast<std::size_t>(model.cfg.blocks) == ctx.blocks.size(),
          "scnn context does not match model");
  std::vector<Tensor> up;
  up.reserve(static_cast<std::size_t>(batch));
  for (std::int64_t s = 0; s < batch; ++s) {
    const Tensor& d = d_yhat[static_cast<std::size_t>(s)];
    require(d.rank() == 3, "d_yhat must be rank 3");
    Tensor dz({1, 1, d.dim(0), d.dim(1), d.dim(2)});
    for (std::int64_t i = 0; i < d.size(); ++i) dz[i] = -d[i];
    up.push_back(std::move(dz));
  }
  std::size_t bn_index = model.bns.size();
  for (std::int64_t b = model.cfg.blocks - 1; b >= 0; --b) {
    ScnnBlockContext& bc = ctx.blocks[static_cast<std::size_t>(b)];
    if (b < model.cfg.blocks - 1)
      for (std::int64_t s = 0; s < batch; ++s)
        up[static_cast<std::size_t>(s)] = ops::relu_backward(
            bc.pre_act[static_cast<std::size_t>(s)],
            up[static_cast<std::size_t>(s)]);
    if (model.cfg.has_bn(b)) {
      BatchNormLayer& bn = model.bns[--bn_index];
      std::vector<const Tensor*> xs, ups;
      for (std::int64_t s = 0; s < batch; ++s) {
        xs.push_back(&bc.sep_out[static_cast<std::size_t>(s)]);
        ups.push_back(&up[static_cast<std::size_t>(s)]);
      }
      std::vector<Tensor> dxs;
      ops::batchnorm_backward(xs, ups, bn.gamma->value, bc.bn, &dxs,
                              &bn.gamma->grad, &bn.beta->grad);
      up = std::move(dxs);
    }
    for (std::int64_t s = 0; s < batch; ++s)
      up[static_cast<std::size_t>(s)] = sepconv_backward(
          bc.inputs[static_cast<std::size_t>(s)],
          model.layers[static_cast<std::size_t>(b)],
          bc.sep[static_cast<std::size_t>(s)],
          up[static_cast<std::size_t>(s)], b > 0);
  }
}

}  // namespace pacnet
