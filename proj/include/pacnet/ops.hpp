#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/parallel.hpp"
#include "pacnet/tensor.hpp"

// Numeric primitives with explicit forward/backward pairs. This is the whole
// operator set; networks chain these by hand. Conventions:
//   - cross-correlation semantics (no kernel flip)
//   - inner loops accumulate in f64 regardless of the element type
//   - every output element is produced by exactly one worker in a fixed
//     summation order, so results do not depend on the worker count

namespace pacnet::ops {

// ---- conv2d ----------------------------------------------------------------
// input (Cin,H,W), weight (Cout,Cin,kh,kw), bias (Cout), zero padding `pad`
// on both spatial sides. Output (Cout, H+2p-kh+1, W+2p-kw+1).

template <typename T>
void check_conv2d_shapes(const TensorT<T>& input, const TensorT<T>& weight,
                         const TensorT<T>& bias, std::int64_t pad) {
  require(input.rank() == 3, "conv2d input must be rank 3, got ",
          input.shape_string());
  require(weight.rank() == 4, "conv2d weight must be rank 4, got ",
          weight.shape_string());
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
          "conv2d bias must be rank 1 of size Cout=",
          std::to_string(weight.dim(0)), ", got ", bias.shape_string());
  require(weight.dim(1) == input.dim(0),
          "conv2d channel mismatch: input Cin=", std::to_string(input.dim(0)),
          " vs weight Cin=", std::to_string(weight.dim(1)));
  require(weight.dim(2) % 2 == 1 && weight.dim(3) % 2 == 1,
          "conv2d kernel sides must be odd, got ", weight.shape_string());
  require(pad >= 0, "conv2d pad must be non-negative");
  require(input.dim(1) + 2 * pad >= weight.dim(2) &&
              input.dim(2) + 2 * pad >= weight.dim(3),
          "conv2d kernel larger than padded input: input ",
          input.shape_string(), ", kernel ", weight.shape_string(), ", pad ",
          std::to_string(pad));
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, std::int64_t pad) {
  check_conv2d_shapes(input, weight, bias, pad);
  const std::int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::int64_t cout = weight.dim(0), kh = weight.dim(2),
                     kw = weight.dim(3);
  const std::int64_t ho = h + 2 * pad - kh + 1, wo = w + 2 * pad - kw + 1;
  TensorT<T> out({cout, ho, wo});
  parallel_for(0, cout, [&](std::int64_t o) {
    for (std::int64_t y = 0; y < ho; ++y) {
      for (std::int64_t x = 0; x < wo; ++x) {
        double acc = static_cast<double>(bias[o]);
        for (std::int64_t i = 0; i < cin; ++i) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const std::int64_t yi = y + dy - pad;
            if (yi < 0 || yi >= h) continue;
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const std::int64_t xi = x + dx - pad;
              if (xi < 0 || xi >= w) continue;
              acc += static_cast<double>(input.at(i, yi, xi)) *
                     static_cast<double>(weight.at(o, i, dy, dx));
            }
          }
        }
        out.at(o, y, x) = static_cast<T>(acc);
      }
    }
  });
  return out;
}

// Gradients. Any of dinput/dweight/dbias may be null to skip. Accumulates
// into the provided tensors (callers zero them when starting a fresh pass).
template <typename T>
void conv2d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                     const TensorT<T>& upstream, std::int64_t pad,
                     TensorT<T>* dinput, TensorT<T>* dweight,
                     TensorT<T>* dbias) {
  const std::int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::int64_t cout = weight.dim(0), kh = weight.dim(2),
                     kw = weight.dim(3);
  const std::int64_t ho = h + 2 * pad - kh + 1, wo = w + 2 * pad - kw + 1;
  require(upstream.rank() == 3 && upstream.dim(0) == cout &&
              upstream.dim(1) == ho && upstream.dim(2) == wo,
          "conv2d upstream shape mismatch: expected (",
          std::to_string(cout), ",", std::to_string(ho), ",",
          std::to_string(wo), "), got ", upstream.shape_string());
  if (dinput) {
    require(dinput->same_shape(input), "conv2d dinput shape mismatch");
    parallel_for(0, cin, [&](std::int64_t i) {
      for (std::int64_t yi = 0; yi < h; ++yi) {
        for (std::int64_t xi = 0; xi < w; ++xi) {
          double acc = 0.0;
          for (std::int64_t o = 0; o < cout; ++o) {
            for (std::int64_t dy = 0; dy < kh; ++dy) {
              const std::int64_t y = yi - dy + pad;
              if (y < 0 || y >= ho) continue;
              for (std::int64_t dx = 0; dx < kw; ++dx) {
                const std::int64_t x = xi - dx + pad;
                if (x < 0 || x >= wo) continue;
                acc += static_cast<double>(upstream.at(o, y, x)) *
                       static_cast<double>(weight.at(o, i, dy, dx));
              }
            }
          }
          dinput->at(i, yi, xi) += static_cast<T>(acc);
        }
      }
    });
  }
  if (dweight || dbias) {
    if (dweight)
      require(dweight->same_shape(weight), "conv2d dweight shape mismatch");
    if (dbias)
      require(dbias->rank() == 1 && dbias->dim(0) == cout,
              "conv2d dbias shape mismatch");
    parallel_for(0, cout, [&](std::int64_t o) {
      if (dbias) {
        double acc = 0.0;
        for (std::int64_t y = 0; y < ho; ++y)
          for (std::int64_t x = 0; x < wo; ++x)
            acc += static_cast<double>(upstream.at(o, y, x));
        (*dbias)[o] += static_cast<T>(acc);
      }
      if (!dweight) return;
      for (std::int64_t i = 0; i < cin; ++i) {
        for (std::int64_t dy = 0; dy < kh; ++dy) {
          for (std::int64_t dx = 0; dx < kw; ++dx) {
            double acc = 0.0;
            for (std::int64_t y = 0; y < ho; ++y) {
              const std::int64_t yi = y + dy - pad;
              if (yi < 0 || yi >= h) continue;
              for (std::int64_t x = 0; x < wo; ++x) {
                const std::int64_t xi = x + dx - pad;
                if (xi < 0 || xi >= w) continue;
                acc += static_cast<double>(upstream.at(o, y, x)) *
                       static_cast<double>(input.at(i, yi, xi));
              }
            }
            dweight->at(o, i, dy, dx) += static_cast<T>(acc);
          }
        }
      }
    });
  }
}

// ---- conv3d ----------------------------------------------------------------
// input (Cin,T,H,W), weight (Cout,Cin,kt,kh,kw). No temporal padding, zero
// spatial padding `pad`. Output (Cout, T-kt+1, H+2p-kh+1, W+2p-kw+1).

template <typename T>
void check_conv3d_shapes(const TensorT<T>& input, const TensorT<T>& weight,
                         const TensorT<T>& bias, std::int64_t pad) {
  require(input.rank() == 4, "conv3d input must be rank 4, got ",
          input.shape_string());
  require(weight.rank() == 5, "conv3d weight must be rank 5, got ",
          weight.shape_string());
  require(bias.rank() == 1 && bias.dim(0) == weight.dim(0),
          "conv3d bias must be rank 1 of size Cout=",
          std::to_string(weight.dim(0)), ", got ", bias.shape_string());
  require(weight.dim(1) == input.dim(0),
          "conv3d channel mismatch: input Cin=", std::to_string(input.dim(0)),
          " vs weight Cin=", std::to_string(weight.dim(1)));
  require(input.dim(1) >= weight.dim(2),
          "conv3d temporal extent ", std::to_string(input.dim(1)),
          " shorter than kernel ", std::to_string(weight.dim(2)));
  require(weight.dim(3) % 2 == 1 && weight.dim(4) % 2 == 1,
          "conv3d spatial kernel sides must be odd, got ",
          weight.shape_string());
  require(pad >= 0, "conv3d pad must be non-negative");
}

template <typename T>
TensorT<T> conv3d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, std::int64_t pad) {
  check_conv3d_shapes(input, weight, bias, pad);
  const std::int64_t cin = input.dim(0), tt = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t cout = weight.dim(0), kt = weight.dim(2),
                     kh = weight.dim(3), kw = weight.dim(4);
  const std::int64_t to = tt - kt + 1, ho = h + 2 * pad - kh + 1,
                     wo = w + 2 * pad - kw + 1;
  TensorT<T> out({cout, to, ho, wo});
  parallel_for(0, cout, [&](std::int64_t o) {
    for (std::int64_t t = 0; t < to; ++t) {
      for (std::int64_t y = 0; y < ho; ++y) {
        for (std::int64_t x = 0; x < wo; ++x) {
          double acc = static_cast<double>(bias[o]);
          for (std::int64_t i = 0; i < cin; ++i) {
            for (std::int64_t dt = 0; dt < kt; ++dt) {
              for (std::int64_t dy = 0; dy < kh; ++dy) {
                const std::int64_t yi = y + dy - pad;
                if (yi < 0 || yi >= h) continue;
                for (std::int64_t dx = 0; dx < kw; ++dx) {
                  const std::int64_t xi = x + dx - pad;
                  if (xi < 0 || xi >= w) continue;
                  acc += static_cast<double>(input.at(i, t + dt, yi, xi)) *
                         static_cast<double>(weight.at(o, i, dt, dy, dx));
                }
              }
            }
          }
          out.at(o, t, y, x) = static_cast<T>(acc);
        }
      }
    }
  });
  return out;
}

template <typename T>
void conv3d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                     const TensorT<T>& upstream, std::int64_t pad,
                     TensorT<T>* dinput, TensorT<T>* dweight,
                     TensorT<T>* dbias) {
  const std::int64_t cin = input.dim(0), tt = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t cout = weight.dim(0), kt = weight.dim(2),
                     kh = weight.dim(3), kw = weight.dim(4);
  const std::int64_t to = tt - kt + 1, ho = h + 2 * pad - kh + 1,
                     wo = w + 2 * pad - kw + 1;
  require(upstream.rank() == 4 && upstream.dim(0) == cout &&
              upstream.dim(1) == to && upstream.dim(2) == ho &&
              upstream.dim(3) == wo,
          "conv3d upstream shape mismatch, got ", upstream.shape_string());
  if (dinput) {
    require(dinput->same_shape(input), "conv3d dinput shape mismatch");
    parallel_for(0, cin, [&](std::int64_t i) {
      for (std::int64_t ti = 0; ti < tt; ++ti) {
        for (std::int64_t yi = 0; yi < h; ++yi) {
          for (std::int64_t xi = 0; xi < w; ++xi) {
            double acc = 0.0;
            for (std::int64_t o = 0; o < cout; ++o) {
              for (std::int64_t dt = 0; dt < kt; ++dt) {
                const std::int64_t t = ti - dt;
                if (t < 0 || t >= to) continue;
                for (std::int64_t dy = 0; dy < kh; ++dy) {
                  const std::int64_t y = yi - dy + pad;
                  if (y < 0 || y >= ho) continue;
                  for (std::int64_t dx = 0; dx < kw; ++dx) {
                    const std::int64_t x = xi - dx + pad;
                    if (x < 0 || x >= wo) continue;
                    acc += static_cast<double>(upstream.at(o, t, y, x)) *
                           static_cast<double>(weight.at(o, i, dt, dy, dx));
                  }
                }
              }
            }
            dinput->at(i, ti, yi, xi) += static_cast<T>(acc);
          }
        }
      }
    });
  }
  if (dweight || dbias) {
    if (dweight)
      require(dweight->same_shape(weight), "conv3d dweight shape mismatch");
    if (dbias)
      require(dbias->rank() == 1 && dbias->dim(0) == cout,
              "conv3d dbias shape mismatch");
    parallel_for(0, cout, [&](std::int64_t o) {
      if (dbias) {
        double acc = 0.0;
        for (std::int64_t t = 0; t < to; ++t)
          for (std::int64_t y = 0; y < ho; ++y)
            for (std::int64_t x = 0; x < wo; ++x)
              acc += static_cast<double>(upstream.at(o, t, y, x));
        (*dbias)[o] += static_cast<T>(acc);
      }
      if (!dweight) return;
      for (std::int64_t i = 0; i < cin; ++i) {
        for (std::int64_t dt = 0; dt < kt; ++dt) {
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              double acc = 0.0;
              for (std::int64_t t = 0; t < to; ++t) {
                for (std::int64_t y = 0; y < ho; ++y) {
                  const std::int64_t yi = y + dy - pad;
                  if (yi < 0 || yi >= h) continue;
                  for (std::int64_t x = 0; x < wo; ++x) {
                    const std::int64_t xi = x + dx - pad;
                    if (xi < 0 || xi >= w) continue;
                    acc += static_cast<double>(upstream.at(o, t, y, x)) *
                           static_cast<double>(input.at(i, t + dt, yi, xi));
                  }
                }
              }
              dweight->at(o, i, dt, dy, dx) += static_cast<T>(acc);
            }
          }
        }
      }
    });
  }
}

// ---- activations -----------------------------------------------------------

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[i] = x[i] > T(0) ? x[i] : T(0);
  return out;
}

// Gradient uses the forward input; at exactly 0 the subgradient 0 is taken.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& upstream) {
  require(x.same_shape(upstream), "relu upstream shape mismatch");
  TensorT<T> out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[i] = x[i] > T(0) ? upstream[i] : T(0);
  return out;
}

template <typename T>
TensorT<T> lrelu(const TensorT<T>& x, double slope) {
  require(slope > 0.0 && slope < 1.0, "lrelu slope must lie in (0,1)");
  TensorT<T> out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[i] = x[i] >= T(0) ? x[i] : static_cast<T>(slope * x[i]);
  return out;
}

template <typename T>
TensorT<T> lrelu_backward(const TensorT<T>& x, double slope,
                          const TensorT<T>& upstream) {
  require(x.same_shape(upstream), "lrelu upstream shape mismatch");
  TensorT<T> out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i)
    out[i] =
        x[i] >= T(0) ? upstream[i] : static_cast<T>(slope * upstream[i]);
  return out;
}

// ---- batch normalization ---------------------------------------------------
// Activations are viewed as (channels, inner): the channel axes lead, the
// population axes trail, and size == channels * inner. Normalization pools
// over every sample in the batch plus the inner axes, so the whole batch must
// pass through one call. Variance is the population (biased) variance.

template <typename T>
struct BatchNormContext {
  std::vector<double> mean;     // per channel
  std::vector<double> inv_std;  // per channel, 1/sqrt(var+eps)
  std::int64_t channels = 0;
  std::int64_t inner = 0;
};

template <typename T>
std::vector<TensorT<T>> batchnorm_forward(
    const std::vector<const TensorT<T>*>& xs, std::int64_t channels,
    const TensorT<T>& gamma, const TensorT<T>& beta, TensorT<T>& running_mean,
    TensorT<T>& running_var, bool training, double momentum, double eps,
    BatchNormContext<T>* ctx) {
  require(!xs.empty(), "batchnorm requires at least one sample");
  const std::int64_t total = xs[0]->size();
  require(total % channels == 0,
          "batchnorm channel count ", std::to_string(channels),
          " does not divide activation size ", std::to_string(total));
  const std::int64_t inner = total / channels;
  for (const auto* x : xs)
    require(x->size() == total, "batchnorm batch samples differ in shape");
  require(gamma.size() == channels && beta.size() == channels &&
              running_mean.size() == channels && running_var.size() == channels,
          "batchnorm parameter size mismatch");
  const std::int64_t batch = static_cast<std::int64_t>(xs.size());
  const double population = static_cast<double>(batch * inner);
  require(!training || population >= 2.0,
          "batchnorm training needs a population of at least 2");

  std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
  std::vector<double> inv_std(static_cast<std::size_t>(channels), 0.0);
  if (training) {
    parallel_for(0, channels, [&](std::int64_t k) {
      double s = 0.0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = xs[static_cast<std::size_t>(b)]->data() + k * inner;
        for (std::int64_t j = 0; j < inner; ++j)
          s += static_cast<double>(p[j]);
      }
      const double mu = s / population;
      double v = 0.0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* p = xs[static_cast<std::size_t>(b)]->data() + k * inner;
        for (std::int64_t j = 0; j < inner; ++j) {
          const double d = static_cast<double>(p[j]) - mu;
          v += d * d;
        }
      }
      v /= population;
      mean[static_cast<std::size_t>(k)] = mu;
      inv_std[static_cast<std::size_t>(k)] = 1.0 / std::sqrt(v + eps);
      running_mean[k] = static_cast<T>(
          (1.0 - momentum) * static_cast<double>(running_mean[k]) +
          momentum * mu);
      running_var[k] = static_cast<T>(
          (1.0 - momentum) * static_cast<double>(running_var[k]) +
          momentum * v);
    });
  } else {
    for (std::int64_t k = 0; k < channels; ++k) {
      mean[static_cast<std::size_t>(k)] = static_cast<double>(running_mean[k]);
      inv_std[static_cast<std::size_t>(k)] =
          1.0 / std::sqrt(static_cast<double>(running_var[k]) + eps);
    }
  }

  std::vector<TensorT<T>> outs;
  outs.reserve(xs.size());
  for (const auto* x : xs) outs.emplace_back(x->shape());
  parallel_for(0, channels, [&](std::int64_t k) {
    const double mu = mean[static_cast<std::size_t>(k)];
    const double is = inv_std[static_cast<std::size_t>(k)];
    const double g = static_cast<double>(gamma[k]);
    const double b0 = static_cast<double>(beta[k]);
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* p = xs[static_cast<std::size_t>(b)]->data() + k * inner;
      T* q = outs[static_cast<std::size_t>(b)].data() + k * inner;
      for (std::int64_t j = 0; j < inner; ++j)
        q[j] = static_cast<T>(g * ((static_cast<double>(p[j]) - mu) * is) + b0);
    }
  });
  if (ctx) {
    ctx->mean = std::move(mean);
    ctx->inv_std = std::move(inv_std);
    ctx->channels = channels;
    ctx->inner = inner;
  }
  return outs;
}

// Backward for train mode (mean/var depend on the batch). dxs gets one tensor
// per sample; dgamma/dbeta are accumulated.
template <typename T>
void batchnorm_backward(const std::vector<const TensorT<T>*>& xs,
                        const std::vector<const TensorT<T>*>& upstreams,
                        const TensorT<T>& gamma,
                        const BatchNormContext<T>& ctx,
                        std::vector<TensorT<T>>* dxs, TensorT<T>* dgamma,
                        TensorT<T>* dbeta) {
  const std::int64_t channels = ctx.channels, inner = ctx.inner;
  const std::int64_t batch = static_cast<std::int64_t>(xs.size());
  require(upstreams.size() == xs.size(), "batchnorm upstream batch mismatch");
  const double population = static_cast<double>(batch * inner);
  if (dxs) {
    dxs->clear();
    for (const auto* x : xs) dxs->emplace_back(x->shape());
  }
  parallel_for(0, channels, [&](std::int64_t k) {
    const double mu = ctx.mean[static_cast<std::size_t>(k)];
    const double is = ctx.inv_std[static_cast<std::size_t>(k)];
    const double g = static_cast<double>(gamma[k]);
    double sum_up = 0.0, sum_up_xhat = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* px = xs[static_cast<std::size_t>(b)]->data() + k * inner;
      const T* pu = upstreams[static_cast<std::size_t>(b)]->data() + k * inner;
      for (std::int64_t j = 0; j < inner; ++j) {
        const double xhat = (static_cast<double>(px[j]) - mu) * is;
        sum_up += static_cast<double>(pu[j]);
        sum_up_xhat += static_cast<double>(pu[j]) * xhat;
      }
    }
    if (dgamma) (*dgamma)[k] += static_cast<T>(sum_up_xhat);
    if (dbeta) (*dbeta)[k] += static_cast<T>(sum_up);
    if (!dxs) return;
    const double mean_up = sum_up / population;
    const double mean_up_xhat = sum_up_xhat / population;
    for (std::int64_t b = 0; b < batch; ++b) {
      const T* px = xs[static_cast<std::size_t>(b)]->data() + k * inner;
      const T* pu = upstreams[static_cast<std::size_t>(b)]->data() + k * inner;
      T* pd = (*dxs)[static_cast<std::size_t>(b)].data() + k * inner;
      for (std::int64_t j = 0; j < inner; ++j) {
        const double xhat = (static_cast<double>(px[j]) - mu) * is;
        pd[j] = static_cast<T>(
            g * is *
            (static_cast<double>(pu[j]) - mean_up - xhat * mean_up_xhat));
      }
    }
  });
}

// ---- mse loss --------------------------------------------------------------

template <typename T>
double mse_loss(const TensorT<T>& pred, const TensorT<T>& target,
                TensorT<T>* dpred = nullptr) {
  require(pred.same_shape(target), "mse shape mismatch: ",
          pred.shape_string(), " vs ", target.shape_string());
  require(pred.size() > 0, "mse on empty tensor");
  const double n = static_cast<double>(pred.size());
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d =
        static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  if (dpred) {
    require(dpred->same_shape(pred), "mse dpred shape mismatch");
    for (std::int64_t i = 0; i < pred.size(); ++i)
      (*dpred)[i] = static_cast<T>(
          2.0 *
          (static_cast<double>(pred[i]) - static_cast<double>(target[i])) / n);
  }
  return acc / n;
}

}  // namespace pacnet::ops
