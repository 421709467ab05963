#pragma once

// Reference implementations for cross-checking the optimized kernels. These
// are deliberately written the slow, obvious way — explicit padded copies and
// nested loops in a different traversal order — so that agreement with the
// library is meaningful.

#include <cstdint>
#include <vector>

#include "pacnet/sepconv.hpp"
#include "pacnet/tensor.hpp"

namespace oracles {

using pacnet::TensorT;

template <typename T>
TensorT<T> pad2d(const TensorT<T>& x, std::int64_t pad) {
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  TensorT<T> out({c, h + 2 * pad, w + 2 * pad});
  for (std::int64_t i = 0; i < c; ++i)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t xx = 0; xx < w; ++xx)
        out.at(i, y + pad, xx + pad) = x.at(i, y, xx);
  return out;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, std::int64_t pad) {
  const TensorT<T> p = pad2d(input, pad);
  const std::int64_t cin = input.dim(0);
  const std::int64_t cout = weight.dim(0), kh = weight.dim(2),
                     kw = weight.dim(3);
  const std::int64_t ho = p.dim(1) - kh + 1, wo = p.dim(2) - kw + 1;
  TensorT<T> out({cout, ho, wo});
  for (std::int64_t o = 0; o < cout; ++o)
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t x = 0; x < wo; ++x) {
        double acc = static_cast<double>(bias[o]);
        for (std::int64_t dy = 0; dy < kh; ++dy)
          for (std::int64_t dx = 0; dx < kw; ++dx)
            for (std::int64_t i = 0; i < cin; ++i)
              acc += static_cast<double>(p.at(i, y + dy, x + dx)) *
                     static_cast<double>(weight.at(o, i, dy, dx));
        out.at(o, y, x) = static_cast<T>(acc);
      }
  return out;
}

template <typename T>
TensorT<T> conv3d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, std::int64_t pad) {
  const std::int64_t cin = input.dim(0), t = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t cout = weight.dim(0), kt = weight.dim(2),
                     kh = weight.dim(3), kw = weight.dim(4);
  TensorT<T> p({cin, t, h + 2 * pad, w + 2 * pad});
  for (std::int64_t i = 0; i < cin; ++i)
    for (std::int64_t tt = 0; tt < t; ++tt)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xx = 0; xx < w; ++xx)
          p.at(i, tt, y + pad, xx + pad) = input.at(i, tt, y, xx);
  const std::int64_t to = t - kt + 1;
  const std::int64_t ho = p.dim(2) - kh + 1, wo = p.dim(3) - kw + 1;
  TensorT<T> out({cout, to, ho, wo});
  for (std::int64_t o = 0; o < cout; ++o)
    for (std::int64_t tt = 0; tt < to; ++tt)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t x = 0; x < wo; ++x) {
          double acc = static_cast<double>(bias[o]);
          for (std::int64_t dt = 0; dt < kt; ++dt)
            for (std::int64_t dy = 0; dy < kh; ++dy)
              for (std::int64_t dx = 0; dx < kw; ++dx)
                for (std::int64_t i = 0; i < cin; ++i)
                  acc += static_cast<double>(
                             p.at(i, tt + dt, y + dy, x + dx)) *
                         static_cast<double>(weight.at(o, i, dt, dy, dx));
          out.at(o, tt, y, x) = static_cast<T>(acc);
        }
  return out;
}

// The three stages straight from their definitions, one output element at a
// time, without delegating to any conv kernel.
template <typename T>
TensorT<T> sepconv(const TensorT<T>& x, const pacnet::SepConvConfig& g,
                   const pacnet::SepConvTensors<T>& p) {
  const std::int64_t v = x.dim(3), h = x.dim(4);
  const std::int64_t rm = (g.m - 1) / 2;

  // conv_vh: per (n, f), c -> c spatial filtering with zero padding.
  TensorT<T> y1({g.n_in, g.f_in, g.c, v, h});
  for (std::int64_t n = 0; n < g.n_in; ++n)
    for (std::int64_t f = 0; f < g.f_in; ++f)
      for (std::int64_t co = 0; co < g.c; ++co)
        for (std::int64_t yy = 0; yy < v; ++yy)
          for (std::int64_t xx = 0; xx < h; ++xx) {
            const std::int64_t grp = n * g.f_in + f;
            double acc = static_cast<double>(p.vh_b.at(grp, co));
            for (std::int64_t ci = 0; ci < g.c; ++ci)
              for (std::int64_t dy = -rm; dy <= rm; ++dy)
                for (std::int64_t dx = -rm; dx <= rm; ++dx) {
                  const std::int64_t sy = yy + dy, sx = xx + dx;
                  if (sy < 0 || sy >= v || sx < 0 || sx >= h) continue;
                  acc += static_cast<double>(x.at(n, f, ci, sy, sx)) *
                         static_cast<double>(
                             p.vh_w.at(grp, co, ci, dy + rm, dx + rm));
                }
            y1.at(n, f, co, yy, xx) = static_cast<T>(acc);
          }

  // conv_f: per n, flattened (f, c) -> (f_out, c) pointwise mixing.
  TensorT<T> y2({g.n_in, g.f_out, g.c, v, h});
  for (std::int64_t n = 0; n < g.n_in; ++n)
    for (std::int64_t fo = 0; fo < g.f_out; ++fo)
      for (std::int64_t co = 0; co < g.c; ++co)
        for (std::int64_t yy = 0; yy < v; ++yy)
          for (std::int64_t xx = 0; xx < h; ++xx) {
            const std::int64_t row = fo * g.c + co;
            double acc = static_cast<double>(p.f_b.at(n, row));
            for (std::int64_t fi = 0; fi < g.f_in; ++fi)
              for (std::int64_t ci = 0; ci < g.c; ++ci)
                acc += static_cast<double>(y1.at(n, fi, ci, yy, xx)) *
                       static_cast<double>(p.f_w.at(n, row, fi * g.c + ci));
            y2.at(n, fo, co, yy, xx) = static_cast<T>(acc);
          }

  // conv_n: per (f_out, c), n_in -> n_out pointwise mixing.
  TensorT<T> out({g.n_out, g.f_out, g.c, v, h});
  for (std::int64_t no = 0; no < g.n_out; ++no)
    for (std::int64_t fo = 0; fo < g.f_out; ++fo)
      for (std::int64_t co = 0; co < g.c; ++co)
        for (std::int64_t yy = 0; yy < v; ++yy)
          for (std::int64_t xx = 0; xx < h; ++xx) {
            const std::int64_t grp = fo * g.c + co;
            double acc = static_cast<double>(p.n_b.at(grp, no));
            for (std::int64_t ni = 0; ni < g.n_in; ++ni)
              acc += static_cast<double>(y2.at(ni, fo, co, yy, xx)) *
                     static_cast<double>(p.n_w.at(grp, no, ni));
            out.at(no, fo, co, yy, xx) = static_cast<T>(acc);
          }
  return out;
}

template <typename T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) -
                              static_cast<double>(b[i]));
    if (d > worst) worst = d;
  }
  return worst;
}

template <typename T>
void fill_gaussian(TensorT<T>& t, std::uint64_t seed, std::uint64_t stream,
                   double scale = 1.0) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(scale * pacnet::rng::gaussian(seed, stream, i));
}

template <typename T>
void fill_uniform(TensorT<T>& t, std::uint64_t seed, std::uint64_t stream) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(pacnet::rng::uniform(seed, stream, i));
}

}  // namespace oracles
