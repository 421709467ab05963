#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/frame_sequence.hpp"
#include "pacnet/parallel.hpp"
#include "pacnet/patch_match.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// One offset's stitched frames. frames[0] is the processed frame itself;
// frames[j>=1] is assembled from every query's j-th nearest neighbor.
struct PatchCraftGroup {
  std::int64_t v_offs = 0, h_offs = 0;
  std::vector<Tensor> frames;
};

using ScoreMaps = std::vector<Tensor>;  // n+1 maps, entry 0 identically zero

// Row-major offset enumeration [0,0] .. [sqrtf-1, sqrtf-1]; f = sqrtf^2.
inline std::vector<std::pair<std::int64_t, std::int64_t>> all_offsets(
    std::int64_t sqrtf) {
  std::vector<std::pair<std::int64_t, std::int64_t>> offs;
  offs.reserve(static_cast<std::size_t>(sqrtf * sqrtf));
  for (std::int64_t v = 0; v < sqrtf; ++v)
    for (std::int64_t h = 0; h < sqrtf; ++h) offs.emplace_back(v, h);
  return offs;
}

// Tiles the mirror-extended plane (sqrtf-1 beyond each frame edge) with
// non-overlapping sqrtf x sqrtf cells whose top-left corners sit at
// offset - (sqrtf-1) plus multiples of sqrtf. Cell content for frame j is the
// central sqrtf x sqrtf part of the query patch's j-th neighbor, where the
// query patch is centered on the cell's center pixel. Cells hanging over the
// frame edge are cropped after stitching.
inline PatchCraftGroup build_group(const FrameSequence& seq, std::int64_t t0,
                                   const NeighborMap& neighbors,
                                   const PatchSpec& spec, std::int64_t v_offs,
                                   std::int64_t h_offs) {
  spec.validate();
  seq.validate();
  const std::int64_t e = (spec.sqrtf - 1) / 2;
  require(v_offs >= 0 && v_offs < spec.sqrtf && h_offs >= 0 &&
              h_offs < spec.sqrtf,
          "offset (", std::to_string(v_offs), ",", std::to_string(h_offs),
          ") outside [0,", std::to_string(spec.sqrtf), ")^2");
  require(neighbors.margin >= e, "neighbor map margin ",
          std::to_string(neighbors.margin), " too small for sqrtf=",
          std::to_string(spec.sqrtf), " (needs >= ", std::to_string(e), ")");
  const Tensor& y = seq.frames[static_cast<std::size_t>(t0)];
  const std::int64_t c = y.dim(0), h = y.dim(1), w = y.dim(2);
  require(neighbors.frame_h == h && neighbors.frame_w == w &&
              neighbors.t0 == t0,
          "neighbor map does not match frame ", std::to_string(t0));

  PatchCraftGroup group;
  group.v_offs = v_offs;
  group.h_offs = h_offs;
  group.frames.emplace_back(y);  // exact copy of the processed frame
  for (std::int64_t j = 1; j <= neighbors.n; ++j)
    group.frames.emplace_back(Tensor({c, h, w}));

  parallel_for(1, neighbors.n + 1, [&](std::int64_t j) {
    Tensor& out = group.frames[static_cast<std::size_t>(j)];
    for (std::int64_t top_y = v_offs - (spec.sqrtf - 1); top_y < h;
         top_y += spec.sqrtf) {
      if (top_y + spec.sqrtf <= 0) continue;
      for (std::int64_t top_x = h_offs - (spec.sqrtf - 1); top_x < w;
           top_x += spec.sqrtf) {
        if (top_x + spec.sqrtf <= 0) continue;
        const std::int64_t cy = top_y + e, cx = top_x + e;
        const Neighbor& nb = neighbors.at(cy, cx)[j - 1];
        const Tensor& src = seq.frames[static_cast<std::size_t>(nb.t)];
        for (std::int64_t yy = std::max<std::int64_t>(0, top_y);
             yy < std::min(h, top_y + spec.sqrtf); ++yy)
          for (std::int64_t xx = std::max<std::int64_t>(0, top_x);
               xx < std::min(w, top_x + spec.sqrtf); ++xx)
            for (std::int64_t ch = 0; ch < c; ++ch)
              out.at(ch, yy, xx) =
                  mirror_at(src, ch, nb.y + (yy - cy), nb.x + (xx - cx));
      }
    }
  });
  return group;
}

// d_j = mean over the f offset groups of (y - y~_ij)^2, elementwise. The
// boxcar convolution of the per-pixel scores is deliberately not applied.
// d_0 is exactly zero because frames[0] is a bit-exact copy of y.
inline ScoreMaps compute_score_maps(const Tensor& y,
                                    const std::vector<PatchCraftGroup>& groups) {
  require(!groups.empty(), "score maps need at least one group");
  const std::size_t per = groups[0].frames.size();
  for (const auto& grp : groups)
    require(grp.frames.size() == per && grp.frames[0].same_shape(y),
            "inconsistent group shapes");
  const double inv_f = 1.0 / static_cast<double>(groups.size());
  ScoreMaps maps;
  for (std::size_t j = 0; j < per; ++j) maps.emplace_back(y.shape());
  parallel_for(0, static_cast<std::int64_t>(per), [&](std::int64_t j) {
    Tensor& d = maps[static_cast<std::size_t>(j)];
    for (std::int64_t i = 0; i < y.size(); ++i) {
      double acc = 0.0;
      for (const auto& grp : groups) {
        const double diff =
            static_cast<double>(y[i]) -
            static_cast<double>(grp.frames[static_cast<std::size_t>(j)][i]);
        acc += diff * diff;
      }
      d[i] = static_cast<float>(acc * inv_f);
    }
  });
  return maps;
}

// (n+1, f+1, C, H, W): f-slot i < f holds group i, slot f holds the scores.
inline Tensor assemble(const std::vector<PatchCraftGroup>& groups,
                       const ScoreMaps& scores) {
  require(!groups.empty(), "assemble needs at least one group");
  const std::int64_t f = static_cast<std::int64_t>(groups.size());
  const std::int64_t n1 = static_cast<std::int64_t>(groups[0].frames.size());
  require(static_cast<std::int64_t>(scores.size()) == n1,
          "score map count ", std::to_string(scores.size()),
          " must equal group frame count ", std::to_string(n1));
  const Tensor& ref = groups[0].frames[0];
  const std::int64_t c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
  Tensor aug({n1, f + 1, c, h, w});
  const std::int64_t per = c * h * w;
  parallel_for(0, n1, [&](std::int64_t j) {
    for (std::int64_t i = 0; i <= f; ++i) {
      const Tensor& src = i < f
                              ? groups[static_cast<std::size_t>(i)]
                                    .frames[static_cast<std::size_t>(j)]
                              : scores[static_cast<std::size_t>(j)];
      require(src.same_shape(ref), "assemble shape mismatch at group ",
              std::to_string(i), ", frame ", std::to_string(j));
      float* dst = aug.data() + (j * (f + 1) + i) * per;
      for (std::int64_t k = 0; k < per; ++k) dst[k] = src[k];
    }
  });
  return aug;
}

// Full augmentation of one frame: neighbor search on the extended query grid,
// one stitched group per offset, score maps, assembly.
inline Tensor augment_frame(const FrameSequence& seq, std::int64_t t0,
                            const PatchSpec& spec, const SearchWindow& win,
                            std::int64_t n) {
  const std::int64_t e = (spec.sqrtf - 1) / 2;
  const NeighborMap neighbors = search_neighbors(seq, t0, spec, win, n, e);
  std::vector<PatchCraftGroup> groups;
  for (const auto& [v, h] : all_offsets(spec.sqrtf))
    groups.push_back(build_group(seq, t0, neighbors, spec, v, h));
  const ScoreMaps scores =
      compute_score_maps(seq.frames[static_cast<std::size_t>(t0)], groups);
  return assemble(groups, scores);
}

}  // namespace pacnet
