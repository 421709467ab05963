#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "pacnet/common.hpp"
#include "pacnet/ops.hpp"
#include "pacnet/optimizer.hpp"
#include "pacnet/rng.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Separable layer over (n, f, c, v, h) tensors, three grouped stages:
//   conv_vh: one c->c m x m spatial conv per (n, f) pair, same padding
//   conv_f : one (c*f_in)->(c*f_out) 1x1 conv per n
//   conv_n : one n_in->n_out 1x1 conv per (f_out, c) pair
// Channel flattening inside conv_f orders (f, c) as f*c + c, matching the
// tensor layout, so stage 2 reads/writes contiguous blocks.
struct SepConvConfig {
  std::int64_t n_in = 1, n_out = 1;
  std::int64_t f_in = 1, f_out = 1;
  std::int64_t c = 1;
  std::int64_t m = 1;

  void validate() const {
    require(n_in >= 1 && n_out >= 1 && f_in >= 1 && f_out >= 1 && c >= 1,
            "sepconv config dimensions must be >= 1");
    require(m >= 1 && m % 2 == 1, "sepconv m must be odd, got ",
            std::to_string(m));
  }
};

inline std::int64_t sepconv_param_count(const SepConvConfig& g) {
  g.validate();
  return g.n_in * g.f_in * (g.c * g.c * g.m * g.m + g.c) +
         g.n_in * (g.c * g.c * g.f_in * g.f_out + g.c * g.f_out) +
         g.f_out * g.c * (g.n_in * g.n_out + g.n_out);
}

template <typename T>
struct SepConvTensors {
  TensorT<T> vh_w;  // (n_in*f_in, c, c, m, m)
  TensorT<T> vh_b;  // (n_in*f_in, c)
  TensorT<T> f_w;   // (n_in, c*f_out, c*f_in)
  TensorT<T> f_b;   // (n_in, c*f_out)
  TensorT<T> n_w;   // (f_out*c, n_out, n_in)
  TensorT<T> n_b;   // (f_out*c, n_out)

  static SepConvTensors zeros(const SepConvConfig& g) {
    g.validate();
    SepConvTensors p;
    p.vh_w = TensorT<T>({g.n_in * g.f_in, g.c, g.c, g.m, g.m});
    p.vh_b = TensorT<T>({g.n_in * g.f_in, g.c});
    p.f_w = TensorT<T>({g.n_in, g.c * g.f_out, g.c * g.f_in});
    p.f_b = TensorT<T>({g.n_in, g.c * g.f_out});
    p.n_w = TensorT<T>({g.f_out * g.c, g.n_out, g.n_in});
    p.n_b = TensorT<T>({g.f_out * g.c, g.n_out});
    return p;
  }

  std::int64_t total_count() const {
    return vh_w.size() + vh_b.size() + f_w.size() + f_b.size() + n_w.size() +
           n_b.size();
  }
};

template <typename T>
struct SepConvContext {
  TensorT<T> y1;  // after conv_vh: (n_in, f_in, c, v, h)
  TensorT<T> y2;  // after conv_f : (n_in, f_out, c, v, h)
};

namespace detail {

template <typename T>
TensorT<T> block_copy(const TensorT<T>& src, std::int64_t offset,
                      std::vector<std::int64_t> shape) {
  TensorT<T> out(std::move(shape));
  std::copy(src.data() + offset, src.data() + offset + out.size(),
            out.data());
  return out;
}

template <typename T>
void block_paste(TensorT<T>& dst, std::int64_t offset, const TensorT<T>& src) {
  std::copy(src.data(), src.data() + src.size(), dst.data() + offset);
}

template <typename T>
void block_add(TensorT<T>& dst, std::int64_t offset, const TensorT<T>& src) {
  for (std::int64_t i = 0; i < src.size(); ++i) dst[offset + i] += src[i];
}

}  // namespace detail

template <typename T>
void check_sepconv_shapes(const TensorT<T>& x, const SepConvConfig& g) {
  g.validate();
  require(x.rank() == 5, "sepconv input must be rank 5, got ",
          x.shape_string());
  require(x.dim(0) == g.n_in && x.dim(1) == g.f_in && x.dim(2) == g.c,
          "sepconv input ", x.shape_string(), " does not match config (n=",
          std::to_string(g.n_in), ", f=", std::to_string(g.f_in), ", c=",
          std::to_string(g.c), ")");
}

template <typename T>
TensorT<T> sepconv_forward(const TensorT<T>& x, const SepConvConfig& g,
                           const TensorT<T>& vh_w, const TensorT<T>& vh_b,
                           const TensorT<T>& f_w, const TensorT<T>& f_b,
                           const TensorT<T>& n_w, const TensorT<T>& n_b,
                           SepConvContext<T>* ctx = nullptr) {
  check_sepconv_shapes(x, g);
  const std::int64_t v = x.dim(3), h = x.dim(4), plane = v * h;
  const std::int64_t cell = g.c * plane;

  TensorT<T> y1({g.n_in, g.f_in, g.c, v, h});
  for (std::int64_t grp = 0; grp < g.n_in * g.f_in; ++grp) {
    const TensorT<T> in = detail::block_copy(x, grp * cell, {g.c, v, h});
    const TensorT<T> k = detail::block_copy(
        vh_w, grp * g.c * g.c * g.m * g.m, {g.c, g.c, g.m, g.m});
    const TensorT<T> b = detail::block_copy(vh_b, grp * g.c, {g.c});
    detail::block_paste(y1, grp * cell, ops::conv2d(in, k, b, (g.m - 1) / 2));
  }

  TensorT<T> y2({g.n_in, g.f_out, g.c, v, h});
  for (std::int64_t n = 0; n < g.n_in; ++n) {
    const TensorT<T> in =
        detail::block_copy(y1, n * g.f_in * cell, {g.f_in * g.c, v, h});
    TensorT<T> k = detail::block_copy(
        f_w, n * g.c * g.f_out * g.c * g.f_in,
        {g.c * g.f_out, g.c * g.f_in, 1, 1});
    const TensorT<T> b =
        detail::block_copy(f_b, n * g.c * g.f_out, {g.c * g.f_out});
    detail::block_paste(y2, n * g.f_out * cell, ops::conv2d(in, k, b, 0));
  }

  TensorT<T> out({g.n_out, g.f_out, g.c, v, h});
  for (std::int64_t fo = 0; fo < g.f_out; ++fo) {
    for (std::int64_t ch = 0; ch < g.c; ++ch) {
      TensorT<T> in({g.n_in, v, h});
      for (std::int64_t n = 0; n < g.n_in; ++n)
        std::copy(y2.data() + ((n * g.f_out + fo) * g.c + ch) * plane,
                  y2.data() + ((n * g.f_out + fo) * g.c + ch) * plane + plane,
                  in.data() + n * plane);
      const std::int64_t grp = fo * g.c + ch;
      TensorT<T> k = detail::block_copy(n_w, grp * g.n_out * g.n_in,
                                        {g.n_out, g.n_in, 1, 1});
      const TensorT<T> b =
          detail::block_copy(n_b, grp * g.n_out, {g.n_out});
      const TensorT<T> o = ops::conv2d(in, k, b, 0);
      for (std::int64_t n = 0; n < g.n_out; ++n)
        std::copy(o.data() + n * plane, o.data() + (n + 1) * plane,
                  out.data() + ((n * g.f_out + fo) * g.c + ch) * plane);
    }
  }

  if (ctx) {
    ctx->y1 = std::move(y1);
    ctx->y2 = std::move(y2);
  }
  return out;
}

// Accumulates parameter gradients into the d_* tensors (any may be null) and
// returns the input gradient (empty tensor when want_dx is false).
template <typename T>
TensorT<T> sepconv_backward(const TensorT<T>& x, const SepConvConfig& g,
                            const TensorT<T>& vh_w, const TensorT<T>& f_w,
                            const TensorT<T>& n_w,
                            const SepConvContext<T>& ctx,
                            const TensorT<T>& upstream, TensorT<T>* d_vh_w,
                            TensorT<T>* d_vh_b, TensorT<T>* d_f_w,
                            TensorT<T>* d_f_b, TensorT<T>* d_n_w,
                            TensorT<T>* d_n_b, bool want_dx = true) {
  check_sepconv_shapes(x, g);
  const std::int64_t v = x.dim(3), h = x.dim(4), plane = v * h;
  const std::int64_t cell = g.c * plane;
  require(upstream.rank() == 5 && upstream.dim(0) == g.n_out &&
              upstream.dim(1) == g.f_out && upstream.dim(2) == g.c &&
              upstream.dim(3) == v && upstream.dim(4) == h,
          "sepconv upstream shape mismatch: ", upstream.shape_string());

  // Stage 3 backward.
  TensorT<T> dy2({g.n_in, g.f_out, g.c, v, h});
  for (std::int64_t fo = 0; fo < g.f_out; ++fo) {
    for (std::int64_t ch = 0; ch < g.c; ++ch) {
      const std::int64_t grp = fo * g.c + ch;
      TensorT<T> in({g.n_in, v, h}), up({g.n_out, v, h});
      for (std::int64_t n = 0; n < g.n_in; ++n)
        std::copy(
            ctx.y2.data() + ((n * g.f_out + fo) * g.c + ch) * plane,
            ctx.y2.data() + ((n * g.f_out + fo) * g.c + ch) * plane + plane,
            in.data() + n * plane);
      for (std::int64_t n = 0; n < g.n_out; ++n)
        std::copy(
            upstream.data() + ((n * g.f_out + fo) * g.c + ch) * plane,
            upstream.data() + ((n * g.f_out + fo) * g.c + ch) * plane + plane,
            up.data() + n * plane);
      TensorT<T> k = detail::block_copy(n_w, grp * g.n_out * g.n_in,
                                        {g.n_out, g.n_in, 1, 1});
      TensorT<T> din(in.shape());
      TensorT<T> dk(k.shape());
      TensorT<T> db({g.n_out});
      ops::conv2d_backward(in, k, up, 0, &din,
                           d_n_w ? &dk : nullptr, d_n_b ? &db : nullptr);
      for (std::int64_t n = 0; n < g.n_in; ++n)
        std::copy(din.data() + n * plane, din.data() + (n + 1) * plane,
                  dy2.data() + ((n * g.f_out + fo) * g.c + ch) * plane);
      if (d_n_w) detail::block_add(*d_n_w, grp * g.n_out * g.n_in, dk);
      if (d_n_b) detail::block_add(*d_n_b, grp * g.n_out, db);
    }
  }

  // Stage 2 backward.
  TensorT<T> dy1({g.n_in, g.f_in, g.c, v, h});
  for (std::int64_t n = 0; n < g.n_in; ++n) {
    const TensorT<T> in =
        detail::block_copy(ctx.y1, n * g.f_in * cell, {g.f_in * g.c, v, h});
    const TensorT<T> up = detail::block_copy(dy2, n * g.f_out * cell,
                                             {g.f_out * g.c, v, h});
    TensorT<T> k = detail::block_copy(
        f_w, n * g.c * g.f_out * g.c * g.f_in,
        {g.c * g.f_out, g.c * g.f_in, 1, 1});
    TensorT<T> din(in.shape());
    TensorT<T> dk(k.shape());
    TensorT<T> db({g.c * g.f_out});
    ops::conv2d_backward(in, k, up, 0, &din, d_f_w ? &dk : nullptr,
                         d_f_b ? &db : nullptr);
    detail::block_paste(dy1, n * g.f_in * cell, din);
    if (d_f_w)
      detail::block_add(*d_f_w, n * g.c * g.f_out * g.c * g.f_in, dk);
    if (d_f_b) detail::block_add(*d_f_b, n * g.c * g.f_out, db);
  }

  // Stage 1 backward.
  TensorT<T> dx;
  if (want_dx) dx = TensorT<T>({g.n_in, g.f_in, g.c, v, h});
  for (std::int64_t grp = 0; grp < g.n_in * g.f_in; ++grp) {
    const TensorT<T> in = detail::block_copy(x, grp * cell, {g.c, v, h});
    const TensorT<T> up = detail::block_copy(dy1, grp * cell, {g.c, v, h});
    const TensorT<T> k = detail::block_copy(
        vh_w, grp * g.c * g.c * g.m * g.m, {g.c, g.c, g.m, g.m});
    TensorT<T> din(in.shape());
    TensorT<T> dk(k.shape());
    TensorT<T> db({g.c});
    ops::conv2d_backward(in, k, up, (g.m - 1) / 2, want_dx ? &din : nullptr,
                         d_vh_w ? &dk : nullptr, d_vh_b ? &db : nullptr);
    if (want_dx) detail::block_paste(dx, grp * cell, din);
    if (d_vh_w) detail::block_add(*d_vh_w, grp * g.c * g.c * g.m * g.m, dk);
    if (d_vh_b) detail::block_add(*d_vh_b, grp * g.c, db);
  }
  return dx;
}

// Struct-parameter conveniences (used by tests and the f64 checker).
template <typename T>
TensorT<T> sepconv_forward(const TensorT<T>& x, const SepConvConfig& g,
                           const SepConvTensors<T>& p,
                           SepConvContext<T>* ctx = nullptr) {
  return sepconv_forward(x, g, p.vh_w, p.vh_b, p.f_w, p.f_b, p.n_w, p.n_b,
                         ctx);
}

template <typename T>
TensorT<T> sepconv_backward(const TensorT<T>& x, const SepConvConfig& g,
                            const SepConvTensors<T>& p,
                            const SepConvContext<T>& ctx,
                            const TensorT<T>& upstream,
                            SepConvTensors<T>* grads, bool want_dx = true) {
  return sepconv_backward(x, g, p.vh_w, p.f_w, p.n_w, ctx, upstream,
                          grads ? &grads->vh_w : nullptr,
                          grads ? &grads->vh_b : nullptr,
                          grads ? &grads->f_w : nullptr,
                          grads ? &grads->f_b : nullptr,
                          grads ? &grads->n_w : nullptr,
                          grads ? &grads->n_b : nullptr, want_dx);
}

// Bank-registered layer: the Param tensors are the only storage; gradients
// from backward land in Param::grad.
struct SepConvLayer {
  SepConvConfig cfg;
  Param* vh_w = nullptr;
  Param* vh_b = nullptr;
  Param* f_w = nullptr;
  Param* f_b = nullptr;
  Param* n_w = nullptr;
  Param* n_b = nullptr;
};

// Kaiming-style fan-in init for the weights, zeros for biases.
inline SepConvLayer make_sepconv_layer(ParamBank& bank,
                                       const std::string& prefix,
                                       const SepConvConfig& g,
                                       std::uint64_t seed) {
  auto p = SepConvTensors<float>::zeros(g);
  const auto fill = [&](Tensor& t, double fan_in, std::uint64_t stream) {
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (std::int64_t i = 0; i < t.size(); ++i)
      t[i] = static_cast<float>(
          std_dev * rng::gaussian(seed, stream, static_cast<std::uint64_t>(i)));
  };
  fill(p.vh_w, static_cast<double>(g.c * g.m * g.m), 1);
  fill(p.f_w, static_cast<double>(g.c * g.f_in), 2);
  fill(p.n_w, static_cast<double>(g.n_in), 3);
  SepConvLayer layer;
  layer.cfg = g;
  layer.vh_w = bank.add(prefix + ".vh_w", std::move(p.vh_w));
  layer.vh_b = bank.add(prefix + ".vh_b", std::move(p.vh_b));
  layer.f_w = bank.add(prefix + ".f_w", std::move(p.f_w));
  layer.f_b = bank.add(prefix + ".f_b", std::move(p.f_b));
  layer.n_w = bank.add(prefix + ".n_w", std::move(p.n_w));
  layer.n_b = bank.add(prefix + ".n_b", std::move(p.n_b));
  return layer;
}

inline Tensor sepconv_forward(const Tensor& x, const SepConvLayer& layer,
                              SepConvContext<float>* ctx = nullptr) {
  return sepconv_forward(x, layer.cfg, layer.vh_w->value, layer.vh_b->value,
                         layer.f_w->value, layer.f_b->value, layer.n_w->value,
                         layer.n_b->value, ctx);
}

inline Tensor sepconv_backward(const Tensor& x, const SepConvLayer& layer,
                               const SepConvContext<float>& ctx,
                               const Tensor& upstream, bool want_dx = true) {
  return sepconv_backward(x, layer.cfg, layer.vh_w->value, layer.f_w->value,
                          layer.n_w->value, ctx, upstream,
                          &layer.vh_w->grad, &layer.vh_b->grad,
                          &layer.f_w->grad, &layer.f_b->grad,
                          &layer.n_w->grad, &layer.n_b->grad, want_dx);
}

}  // namespace pacnet
