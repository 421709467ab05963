#pragma once

#include <cstdint>

#include "pacnet/frame_sequence.hpp"
#include "pacnet/rng.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// sigma is quoted on the 0-255 scale; internal data lives on [0,1], so the
// injected standard deviation is sigma/255.
struct NoiseSpec {
  double sigma = 25.0;
  bool clipped = false;
  std::uint64_t seed = 0;

  void validate() const { require(sigma >= 0.0, "sigma must be >= 0"); }
};

// Each element's noise is a pure function of (seed, frame index, flat
// position), so generation is reproducible under any evaluation order.
inline FrameSequence add_noise(const FrameSequence& seq,
                               const NoiseSpec& spec) {
  spec.validate();
  seq.validate();
  const double std_unit = spec.sigma / 255.0;
  FrameSequence out;
  out.frames.reserve(seq.frames.size());
  for (std::int64_t f = 0; f < seq.frame_count(); ++f) {
    const Tensor& src = seq.frames[static_cast<std::size_t>(f)];
    Tensor dst(src.shape());
    for (std::int64_t i = 0; i < src.size(); ++i) {
      double v = static_cast<double>(src[i]) +
                 std_unit * rng::gaussian(spec.seed,
                                          static_cast<std::uint64_t>(f),
                                          static_cast<std::uint64_t>(i));
      if (spec.clipped) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      dst[i] = static_cast<float>(v);
    }
    out.frames.push_back(std::move(dst));
  }
  return out;
}

}  // namespace pacnet
