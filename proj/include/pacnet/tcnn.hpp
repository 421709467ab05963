#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/ops.hpp"
#include "pacnet/optimizer.hpp"
#include "pacnet/rng.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Temporal refiner over a sliding window of 2*Tt+1 frames. The noisy frames
// and the spatial network's outputs are concatenated along color (2C input
// channels). Tf3D applies Tt 3x3x3 conv blocks with no temporal padding,
// shrinking the window to one frame; Tf2D applies a plain 2-D conv stack.
// Output is the predicted noise z_t; the estimate is yhat_center - z_t.
struct TcnnConfig {
  std::int64_t Tt = 3;
  std::int64_t ch3d = 48;
  std::int64_t ch2d = 96;
  std::int64_t layers2d = 17;
  std::int64_t c = 3;
  double lrelu_slope = 0.1;

  std::int64_t window() const { return 2 * Tt + 1; }

  void validate() const {
    require(Tt >= 1, "Tt must be >= 1");
    require(ch3d >= 1 && ch2d >= 1 && c >= 1, "tcnn channels must be >= 1");
    require(layers2d >= 2, "tcnn needs at least 2 conv2d layers");
    require(lrelu_slope > 0.0 && lrelu_slope < 1.0,
            "lrelu slope must lie in (0,1)");
  }
};

inline std::int64_t tcnn_param_count(const TcnnConfig& g) {
  g.validate();
  std::int64_t total = g.ch3d * (2 * g.c) * 27 + g.ch3d;
  total += (g.Tt - 1) * (g.ch3d * g.ch3d * 27 + g.ch3d);
  total += g.ch2d * g.ch3d * 9 + g.ch2d;
  total += (g.layers2d - 2) * (g.ch2d * g.ch2d * 9 + g.ch2d);
  total += g.c * g.ch2d * 9 + g.c;
  return total;
}

struct TcnnModel {
  TcnnConfig cfg;
  std::vector<Param*> w3, b3;  // Tt conv3d layers
  std::vector<Param*> w2, b2;  // layers2d conv2d layers
};

// Kaiming fan-in init except the final 2-D layer, which starts at zero so an
// untrained model reproduces yhat_center exactly.
inline TcnnModel make_tcnn(ParamBank& bank, const TcnnConfig& g,
                           std::uint64_t seed) {
  g.validate();
  TcnnModel model;
  model.cfg = g;
  const auto fill = [&](Tensor& t, double fan_in, std::uint64_t stream) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (std::int64_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<float>(
          std_dev * rng::gaussian(seed, stream, static_cast<std::uint64_t>(i)));
  };
  for (std::int64_t l = 0; l < g.Tt; ++l) {
    const std::int64_t cin = l == 0 ? 2 * g.c : g.ch3d;
    Tensor w({g.ch3d, cin, 3, 3, 3});
    fill(w, static_cast<double>(cin * 27), 100 + static_cast<std::uint64_t>(l));
    const std::string name = "tcnn.conv3d" + std::to_string(l);
    model.w3.push_back(bank.add(name + ".w", std::move(w)));
    model.b3.push_back(bank.add(name + ".b", Tensor({g.ch3d})));
  }
  for (std::int64_t l = 0; l < g.layers2d; ++l) {
    const std::int64_t cin = l == 0 ? g.ch3d : g.ch2d;
    const std::int64_t cout = l == g.layers2d - 1 ? g.c : g.ch2d;
    Tensor w({cout, cin, 3, 3});
    if (l < g.layers2d - 1)
      fill(w, static_cast<double>(cin * 9),
           200 + static_cast<std::uint64_t>(l));
    const std::string name = "tcnn.conv2d" + std::to_string(l);
    model.w2.push_back(bank.add(name + ".w", std::move(w)));
    model.b2.push_back(bank.add(name + ".b", Tensor({cout})));
  }
  return model;
}

struct TcnnContext {
  Tensor input;               // (2C, 2Tt+1, H, W)
  std::vector<Tensor> in3;    // input to each conv3d layer
  std::vector<Tensor> out3;   // pre-activation output of each conv3d layer
  std::vector<Tensor> in2;    // input to each conv2d layer
  std::vector<Tensor> out2;   // pre-activation output of each conv2d layer
};

inline Tensor stack_window(const TcnnConfig& g,
                           const std::vector<Tensor>& y_window,
                           const std::vector<Tensor>& yhat_window) {
  const std::int64_t win = g.window();
  require(static_cast<std::int64_t>(y_window.size()) == win &&
              static_cast<std::int64_t>(yhat_window.size()) == win,
          "tcnn window must contain exactly ", std::to_string(win),
          " frames, got ", std::to_string(y_window.size()), " noisy and ",
          std::to_string(yhat_window.size()), " spatial outputs");
  const Tensor& ref = y_window[0];
  require(ref.rank() == 3 && ref.dim(0) == g.c, "tcnn frames must be (",
          std::to_string(g.c), ",H,W), got ", ref.shape_string());
  const std::int64_t h = ref.dim(1), w = ref.dim(2), plane = h * w;
  Tensor input({2 * g.c, win, h, w});
  for (std::int64_t t = 0; t < win; ++t) {
    const Tensor& y = y_window[static_cast<std::size_t>(t)];
    const Tensor& yh = yhat_window[static_cast<std::size_t>(t)];
    require(y.same_shape(ref) && yh.same_shape(ref),
            "tcnn window frames must share one shape");
    for (std::int64_t ch = 0; ch < g.c; ++ch)
      for (std::int64_t i = 0; i < plane; ++i) {
        input[(ch * win + t) * plane + i] = y[ch * plane + i];
        input[((g.c + ch) * win + t) * plane + i] = yh[ch * plane + i];
      }
  }
  return input;
}

// Returns x-hat for the window's center frame.
inline Tensor tcnn_forward(const TcnnModel& model,
                           const std::vector<Tensor>& y_window,
                           const std::vector<Tensor>& yhat_window,
                           TcnnContext* ctx = nullptr) {
  const TcnnConfig& g = model.cfg;
  Tensor cur = stack_window(g, y_window, yhat_window);
  if (ctx) ctx->input = cur;
  for (std::int64_t l = 0; l < g.Tt; ++l) {
    if (ctx) ctx->in3.push_back(cur);
    Tensor out = ops::conv3d(cur, model.w3[static_cast<std::size_t>(l)]->value,
                             model.b3[static_cast<std::size_t>(l)]->value, 1);
    if (ctx) ctx->out3.push_back(out);
    cur = ops::lrelu(out, g.lrelu_slope);
  }
  require(cur.dim(1) == 1, "Tf3D must reduce the temporal extent to 1, got ",
          cur.shape_string());
  Tensor flat({cur.dim(0), cur.dim(2), cur.dim(3)});
  std::copy(cur.data(), cur.data() + cur.size(), flat.data());
  cur = std::move(flat);
  for (std::int64_t l = 0; l < g.layers2d; ++l) {
    if (ctx) ctx->in2.push_back(cur);
    Tensor out = ops::conv2d(cur, model.w2[static_cast<std::size_t>(l)]->value,
                             model.b2[static_cast<std::size_t>(l)]->value, 1);
    if (ctx) ctx->out2.push_back(out);
    cur = l < g.layers2d - 1 ? ops::lrelu(out, g.lrelu_slope)
                             : std::move(out);
  }
  const Tensor& center = yhat_window[static_cast<std::size_t>(g.Tt)];
  require(cur.same_shape(center), "tcnn output shape ", cur.shape_string(),
          " does not match frame shape ", center.shape_string());
  Tensor xhat(center.shape());
  for (std::int64_t i = 0; i < xhat.size(); ++i)
    xhat[i] = center[i] - cur[i];
  return xhat;
}

// Accumulates parameter gradients; d_xhat is the loss gradient w.r.t. the
// center output. Only the -z_t branch propagates (yhat is produced by the
// frozen spatial network during temporal training).
inline void tcnn_backward(const TcnnModel& model, const TcnnContext& ctx,
                          const Tensor& d_xhat) {
  const TcnnConfig& g = model.cfg;
  Tensor up(d_xhat.shape());
  for (std::int64_t i = 0; i < up.size(); ++i) up[i] = -d_xhat[i];
  for (std::int64_t l = g.layers2d - 1; l >= 0; --l) {
    if (l < g.layers2d - 1)
      up = ops::lrelu_backward(ctx.out2[static_cast<std::size_t>(l)],
                               g.lrelu_slope, up);
    const Tensor& in = ctx.in2[static_cast<std::size_t>(l)];
    Tensor din(in.shape());
    ops::conv2d_backward(in, model.w2[static_cast<std::size_t>(l)]->value, up,
                         1, &din, &model.w2[static_cast<std::size_t>(l)]->grad,
                         &model.b2[static_cast<std::size_t>(l)]->grad);
    up = std::move(din);
  }
  Tensor up4({up.dim(0), 1, up.dim(1), up.dim(2)});
  std::copy(up.data(), up.data() + up.size(), up4.data());
  for (std::int64_t l = g.Tt - 1; l >= 0; --l) {
    up4 = ops::lrelu_backward(ctx.out3[static_cast<std::size_t>(l)],
                              g.lrelu_slope, up4);
    const Tensor& in = ctx.in3[static_cast<std::size_t>(l)];
    Tensor din(in.shape());
    const bool need_dx = l > 0;
    ops::conv3d_backward(in, model.w3[static_cast<std::size_t>(l)]->value, up4,
                         1, need_dx ? &din : nullptr,
                         &model.w3[static_cast<std::size_t>(l)]->grad,
                         &model.b3[static_cast<std::size_t>(l)]->grad);
    if (need_dx) up4 = std::move(din);
  }
}

}  // namespace pacnet
