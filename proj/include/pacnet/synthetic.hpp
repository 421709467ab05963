#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pacnet/frame_sequence.hpp"
#include "pacnet/rng.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Deterministic clean clips for desk-scale training and evaluation. Two
// families:
//   translating - a band-limited random sinusoid field drifting at an
//                 integer per-frame velocity, so other frames contain exact
//                 copies of every interior patch (strong temporal redundancy)
//   rotating    - the same kind of field spinning around the frame center,
//                 giving subpixel motion without exact matches
// Values stay inside [0.1, 0.9] so unclipped noise keeps headroom.
enum class SyntheticKind { kTranslating, kRotating };

namespace detail {

struct Wave {
  double fy, fx, phase, amp;
};

inline std::vector<Wave> make_waves(std::uint64_t seed, std::int64_t count,
                                    double max_freq) {
  std::vector<Wave> waves;
  double total = 0.0;
  for (std::int64_t k = 0; k < count; ++k) {
    Wave w;
    w.fy = max_freq * (2.0 * rng::uniform(seed, 10, k) - 1.0);
    w.fx = max_freq * (2.0 * rng::uniform(seed, 11, k) - 1.0);
    w.phase = 2.0 * std::numbers::pi * rng::uniform(seed, 12, k);
    w.amp = 0.5 + rng::uniform(seed, 13, k);
    total += w.amp;
    waves.push_back(w);
  }
  for (Wave& w : waves) w.amp /= total;
  return waves;
}

inline double field_value(const std::vector<Wave>& waves, double y, double x) {
  double s = 0.0;
  for (const Wave& w : waves)
    s += w.amp * std::sin(2.0 * std::numbers::pi * (w.fy * y + w.fx * x) +
                          w.phase);
  return 0.5 + 0.4 * s;  // sum of amps is 1, so s stays in [-1,1]
}

}  // namespace detail

inline FrameSequence make_synthetic_clip(SyntheticKind kind,
                                         std::uint64_t seed,
                                         std::int64_t frames, std::int64_t h,
                                         std::int64_t w, std::int64_t c) {
  require(frames >= 1 && h >= 1 && w >= 1 && (c == 1 || c == 3),
          "synthetic clip needs frames,h,w >= 1 and c in {1,3}");
  const auto waves = detail::make_waves(seed, 6, 0.11);
  FrameSequence seq;
  if (kind == SyntheticKind::kTranslating) {
    const std::int64_t vy =
        static_cast<std::int64_t>(rng::below(seed, 20, 0, 5)) - 2;
    std::int64_t vx = static_cast<std::int64_t>(rng::below(seed, 21, 0, 5)) - 2;
    if (vy == 0 && vx == 0) vx = 1;  // guarantee actual motion
    for (std::int64_t t = 0; t < frames; ++t) {
      Tensor frame({c, h, w});
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double chan_shift = 7.0 * static_cast<double>(ch);
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x)
            frame.at(ch, y, x) = static_cast<float>(detail::field_value(
                waves, static_cast<double>(y + t * vy) + chan_shift,
                static_cast<double>(x + t * vx)));
      }
      seq.frames.push_back(std::move(frame));
    }
  } else {
    const double omega =
        (0.5 + rng::uniform(seed, 22, 0)) * 0.02;  // radians per frame
    const double cy = 0.5 * static_cast<double>(h - 1);
    const double cx = 0.5 * static_cast<double>(w - 1);
    for (std::int64_t t = 0; t < frames; ++t) {
      const double a = omega * static_cast<double>(t);
      const double ca = std::cos(a), sa = std::sin(a);
      Tensor frame({c, h, w});
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double chan_shift = 7.0 * static_cast<double>(ch);
        for (std::int64_t y = 0; y < h; ++y)
          for (std::int64_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            frame.at(ch, y, x) = static_cast<float>(detail::field_value(
                waves, ca * dy - sa * dx + chan_shift, sa * dy + ca * dx));
          }
      }
      seq.frames.push_back(std::move(frame));
    }
  }
  return seq;
}

// Clip k of a deterministic mixed corpus: even indices translate, odd rotate.
inline FrameSequence synthetic_corpus_clip(std::uint64_t seed, std::int64_t k,
                                           std::int64_t frames, std::int64_t h,
                                           std::int64_t w, std::int64_t c) {
  const SyntheticKind kind =
      k % 2 == 0 ? SyntheticKind::kTranslating : SyntheticKind::kRotating;
  return make_synthetic_clip(kind, rng::derive(seed, 0xC11F000 + k), frames, h,
                             w, c);
}

}  // namespace pacnet
