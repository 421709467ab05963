#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pacnet/frame_sequence.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Peak signal-to-noise ratio on the [0,1] peak: 10*log10(1/MSE).
// Identical inputs report +infinity.
inline double psnr(const Tensor& clean, const Tensor& test) {
  require(clean.same_shape(test), "psnr shape mismatch: ",
          clean.shape_string(), " vs ", test.shape_string());
  require(clean.size() > 0, "psnr on empty tensor");
  double acc = 0.0;
  for (std::int64_t i = 0; i < clean.size(); ++i) {
    const double d =
        static_cast<double>(clean[i]) - static_cast<double>(test[i]);
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(clean.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

inline std::vector<double> per_frame_psnr(const FrameSequence& clean,
                                          const FrameSequence& test) {
  require(clean.frame_count() == test.frame_count(),
          "psnr frame count mismatch: ",
          std::to_string(clean.frame_count()), " vs ",
          std::to_string(test.frame_count()));
  std::vector<double> out;
  out.reserve(clean.frames.size());
  for (std::size_t f = 0; f < clean.frames.size(); ++f)
    out.push_back(psnr(clean.frames[f], test.frames[f]));
  return out;
}

// Arithmetic mean over frames; +inf frames propagate to +inf.
inline double sequence_psnr(const FrameSequence& clean,
                            const FrameSequence& test) {
  const std::vector<double> per = per_frame_psnr(clean, test);
  double acc = 0.0;
  for (double v : per) acc += v;
  return acc / static_cast<double>(per.size());
}

}  // namespace pacnet
