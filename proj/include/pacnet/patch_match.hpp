#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/frame_sequence.hpp"
#include "pacnet/parallel.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

struct PatchSpec {
  std::int64_t sqrtF = 15;  // search-patch side, odd
  std::int64_t sqrtf = 7;   // stitch-patch side, odd, centered in the above

  void validate() const {
    require(sqrtF >= 1 && sqrtF % 2 == 1, "sqrtF must be odd and >= 1, got ",
            std::to_string(sqrtF));
    require(sqrtf >= 1 && sqrtf % 2 == 1, "sqrtf must be odd and >= 1, got ",
            std::to_string(sqrtf));
    require(sqrtf <= sqrtF, "sqrtf must not exceed sqrtF");
  }
};

struct SearchWindow {
  std::int64_t B = 89;  // spatial window side, centered on the query
  std::int64_t Ts = 3;  // temporal half-window

  void validate(const PatchSpec& spec) const {
    require(B >= spec.sqrtF, "window side B=", std::to_string(B),
            " must be >= sqrtF=", std::to_string(spec.sqrtF));
    require(B % 2 == 1, "window side B must be odd, got ", std::to_string(B));
    require(Ts >= 0, "Ts must be >= 0");
  }
};

struct Neighbor {
  std::int32_t t = 0;
  std::int32_t y = 0;
  std::int32_t x = 0;
  float dist = 0.0f;
};

// Total order: (dist, |t-t0|, t, y, x) ascending. Distances are compared at
// the f64 values produced by the canonical evaluation, before f32 narrowing.
struct NeighborCandidate {
  double dist;
  std::int32_t t, y, x;
};

inline bool candidate_less(const NeighborCandidate& a,
                           const NeighborCandidate& b, std::int64_t t0) {
  if (a.dist != b.dist) return a.dist < b.dist;
  const std::int64_t da = std::llabs(a.t - t0), db = std::llabs(b.t - t0);
  if (da != db) return da < db;
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

// Per-query neighbor lists over a query grid that may extend `margin` pixels
// beyond the frame on each side (patch stitching places query centers there).
// Candidates always lie on the original pixel grid.
struct NeighborMap {
  std::int64_t t0 = 0;
  std::int64_t margin = 0;
  std::int64_t frame_h = 0, frame_w = 0;
  std::int64_t n = 0;
  std::vector<Neighbor> entries;  // (grid_h * grid_w * n), row-major queries

  std::int64_t grid_h() const { return frame_h + 2 * margin; }
  std::int64_t grid_w() const { return frame_w + 2 * margin; }

  // qy in [-margin, frame_h-1+margin], qx likewise.
  const Neighbor* at(std::int64_t qy, std::int64_t qx) const {
    const std::int64_t ry = qy + margin, rx = qx + margin;
    require(ry >= 0 && ry < grid_h() && rx >= 0 && rx < grid_w(),
            "neighbor query (", std::to_string(qy), ",", std::to_string(qx),
            ") outside grid");
    return entries.data() + (ry * grid_w() + rx) * n;
  }
};

// Canonical patch distance: sum of squared differences over all channels of
// the sqrtF x sqrtF patches centered at the given positions, mirror-padded,
// accumulated in f64 in (c, py, px) order. Both the engine and the oracle
// compute final distances with exactly this summation, so they agree bitwise.
inline double patch_ssd(const Tensor& a, std::int64_t ay, std::int64_t ax,
                        const Tensor& b, std::int64_t by, std::int64_t bx,
                        std::int64_t sqrtF) {
  const std::int64_t r = (sqrtF - 1) / 2;
  const std::int64_t c = a.dim(0);
  double acc = 0.0;
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t py = -r; py <= r; ++py)
      for (std::int64_t px = -r; px <= r; ++px) {
        const double d =
            static_cast<double>(mirror_at(a, ch, ay + py, ax + px)) -
            static_cast<double>(mirror_at(b, ch, by + py, bx + px));
        acc += d * d;
      }
  return acc;
}

namespace detail {

struct SearchGeometry {
  std::int64_t t0, n, margin;
  std::int64_t h, w, c, frames;
  std::int64_t r;         // (sqrtF-1)/2
  std::int64_t bh;        // (B-1)/2
  std::int64_t tlo, thi;  // clamped temporal range
};

inline SearchGeometry make_geometry(const FrameSequence& seq, std::int64_t t0,
                                    const PatchSpec& spec,
                                    const SearchWindow& win, std::int64_t n,
                                    std::int64_t margin) {
  spec.validate();
  win.validate(spec);
  seq.validate();
  require(n >= 1, "neighbor count must be >= 1");
  require(margin >= 0, "query margin must be >= 0");
  require(t0 >= 0 && t0 < seq.frame_count(), "frame index ",
          std::to_string(t0), " outside sequence of length ",
          std::to_string(seq.frame_count()));
  SearchGeometry g;
  g.t0 = t0;
  g.n = n;
  g.margin = margin;
  g.h = seq.height();
  g.w = seq.width();
  g.c = seq.channels();
  g.frames = seq.frame_count();
  g.r = (spec.sqrtF - 1) / 2;
  g.bh = (win.B - 1) / 2;
  g.tlo = std::max<std::int64_t>(0, t0 - win.Ts);
  g.thi = std::min<std::int64_t>(g.frames - 1, t0 + win.Ts);
  return g;
}

// Bounded max-heap over raw doubles: tracks the n smallest values seen.
inline void heap_offer(double* heap, std::int64_t& size, std::int64_t cap,
                       double v) {
  if (size < cap) {
    heap[size++] = v;
    std::push_heap(heap, heap + size);
  } else if (v < heap[0]) {
    std::pop_heap(heap, heap + cap);
    heap[cap - 1] = v;
    std::push_heap(heap, heap + cap);
  }
}

// Frame plane mirror-extended by `pad` on every side, flat (c, y, x).
struct PaddedFrame {
  std::int64_t pad = 0, h = 0, w = 0, c = 0;
  std::vector<float> data;

  void build(const Tensor& frame, std::int64_t pad_amount) {
    pad = pad_amount;
    c = frame.dim(0);
    h = frame.dim(1) + 2 * pad;
    w = frame.dim(2) + 2 * pad;
    data.resize(static_cast<std::size_t>(c * h * w));
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y) {
        const std::int64_t sy = mirror_index(y - pad, frame.dim(1));
        float* row = data.data() + (ch * h + y) * w;
        for (std::int64_t x = 0; x < w; ++x)
          row[x] = frame.at(ch, sy, mirror_index(x - pad, frame.dim(2)));
      }
  }

  float at(std::int64_t ch, std::int64_t y, std::int64_t x) const {
    return data[static_cast<std::size_t>((ch * h + y + pad) * w + x + pad)];
  }
};

// Same value and summation order as patch_ssd, reading padded planes.
inline double patch_ssd_padded(const PaddedFrame& a, std::int64_t ay,
                               std::int64_t ax, const PaddedFrame& b,
                               std::int64_t by, std::int64_t bx,
                               std::int64_t r) {
  double acc = 0.0;
  for (std::int64_t ch = 0; ch < a.c; ++ch)
    for (std::int64_t py = -r; py <= r; ++py)
      for (std::int64_t px = -r; px <= r; ++px) {
        const double d = static_cast<double>(a.at(ch, ay + py, ax + px)) -
                         static_cast<double>(b.at(ch, by + py, bx + px));
        acc += d * d;
      }
  return acc;
}

}  // namespace detail

// Exhaustive reference: evaluates every candidate with the canonical distance
// and sorts under the total tie-break order. Defines ground truth.
inline NeighborMap brute_force_oracle(const FrameSequence& seq,
                                      std::int64_t t0, const PatchSpec& spec,
                                      const SearchWindow& win, std::int64_t n,
                                      std::int64_t margin = 0) {
  const detail::SearchGeometry g =
      detail::make_geometry(seq, t0, spec, win, n, margin);
  NeighborMap map;
  map.t0 = t0;
  map.margin = margin;
  map.frame_h = g.h;
  map.frame_w = g.w;
  map.n = n;
  map.entries.resize(
      static_cast<std::size_t>(map.grid_h() * map.grid_w() * n));
  const Tensor& base = seq.frames[static_cast<std::size_t>(t0)];
  parallel_for(0, map.grid_h(), [&](std::int64_t ry) {
    const std::int64_t qy = ry - margin;
    std::vector<NeighborCandidate> cands;
    for (std::int64_t rx = 0; rx < map.grid_w(); ++rx) {
      const std::int64_t qx = rx - margin;
      cands.clear();
      for (std::int64_t t = g.tlo; t <= g.thi; ++t) {
        const Tensor& cand = seq.frames[static_cast<std::size_t>(t)];
        const std::int64_t ylo = std::max<std::int64_t>(0, qy - g.bh);
        const std::int64_t yhi = std::min<std::int64_t>(g.h - 1, qy + g.bh);
        const std::int64_t xlo = std::max<std::int64_t>(0, qx - g.bh);
        const std::int64_t xhi = std::min<std::int64_t>(g.w - 1, qx + g.bh);
        for (std::int64_t cy = ylo; cy <= yhi; ++cy)
          for (std::int64_t cx = xlo; cx <= xhi; ++cx) {
            if (t == t0 && cy == qy && cx == qx) continue;
            cands.push_back({patch_ssd(base, qy, qx, cand, cy, cx, spec.sqrtF),
                             static_cast<std::int32_t>(t),
                             static_cast<std::int32_t>(cy),
                             static_cast<std::int32_t>(cx)});
          }
      }
      require(static_cast<std::int64_t>(cands.size()) >= n,
              "query (", std::to_string(qy), ",", std::to_string(qx),
              ") has only ", std::to_string(cands.size()),
              " candidates, need ", std::to_string(n));
      std::sort(cands.begin(), cands.end(),
                [&](const NeighborCandidate& a, const NeighborCandidate& b) {
                  return candidate_less(a, b, t0);
                });
      Neighbor* out = map.entries.data() + (ry * map.grid_w() + rx) * n;
      for (std::int64_t k = 0; k < n; ++k)
        out[k] = {cands[static_cast<std::size_t>(k)].t,
                  cands[static_cast<std::size_t>(k)].y,
                  cands[static_cast<std::size_t>(k)].x,
                  static_cast<float>(cands[static_cast<std::size_t>(k)].dist)};
    }
  });
  return map;
}

// Optimized search. Two sweeps over per-displacement squared-difference
// planes with prefix-sum box sums:
//   sweep 1 collects, per query, the n-th smallest box-sum distance;
//   sweep 2 keeps every candidate within a rigorous floating-point error
//   margin of that bound and re-evaluates it with the canonical summation.
// The margin bounds |box sum - canonical sum| for any candidate, so the
// shortlist provably contains the true top n (ties included); the final sort
// under the tie-break order therefore matches the oracle bit for bit.
inline NeighborMap search_neighbors(const FrameSequence& seq, std::int64_t t0,
                                    const PatchSpec& spec,
                                    const SearchWindow& win, std::int64_t n,
                                    std::int64_t margin = 0) {
  const detail::SearchGeometry g =
      detail::make_geometry(seq, t0, spec, win, n, margin);
  NeighborMap map;
  map.t0 = t0;
  map.margin = margin;
  map.frame_h = g.h;
  map.frame_w = g.w;
  map.n = n;
  const std::int64_t gh = map.grid_h(), gw = map.grid_w();
  map.entries.resize(static_cast<std::size_t>(gh * gw * n));

  const std::int64_t pad = g.margin + g.r + g.bh;
  std::vector<detail::PaddedFrame> padded(
      static_cast<std::size_t>(g.thi - g.tlo + 1));
  for (std::int64_t t = g.tlo; t <= g.thi; ++t)
    padded[static_cast<std::size_t>(t - g.tlo)].build(
        seq.frames[static_cast<std::size_t>(t)], pad);
  const detail::PaddedFrame& base =
      padded[static_cast<std::size_t>(t0 - g.tlo)];

  // Plane buffer spans every possible query-patch cell once, with an extra
  // zero row/column in front for the prefix sums.
  const std::int64_t ph = gh + 2 * g.r, pw = gw + 2 * g.r;
  std::vector<double> plane(static_cast<std::size_t>((ph + 1) * (pw + 1)));

  std::vector<double> heaps(static_cast<std::size_t>(gh * gw * n), 0.0);
  std::vector<std::int64_t> heap_sizes(static_cast<std::size_t>(gh * gw), 0);
  std::vector<std::int64_t> cand_counts(static_cast<std::size_t>(gh * gw), 0);
  double err_bound = 0.0;

  const auto for_each_plane = [&](auto&& body) {
    for (std::int64_t t = g.tlo; t <= g.thi; ++t) {
      const detail::PaddedFrame& cand =
          padded[static_cast<std::size_t>(t - g.tlo)];
      for (std::int64_t dy = -g.bh; dy <= g.bh; ++dy) {
        // Queries whose candidate row qy+dy stays on the pixel grid.
        const std::int64_t qylo = std::max(-g.margin, -dy);
        const std::int64_t qyhi = std::min(g.h - 1 + g.margin, g.h - 1 - dy);
        if (qylo > qyhi) continue;
        for (std::int64_t dx = -g.bh; dx <= g.bh; ++dx) {
          const std::int64_t qxlo = std::max(-g.margin, -dx);
          const std::int64_t qxhi = std::min(g.w - 1 + g.margin, g.w - 1 - dx);
          if (qxlo > qxhi) continue;
          // Squared-difference plane over all cells any valid query reads,
          // then an inclusive 2-D prefix sum (row pass, then column pass).
          const std::int64_t cy0 = qylo - g.r, cy1 = qyhi + g.r;
          const std::int64_t cx0 = qxlo - g.r, cx1 = qxhi + g.r;
          const std::int64_t rows = cy1 - cy0 + 1, cols = cx1 - cx0 + 1;
          for (std::int64_t i = 0; i <= cols; ++i) plane[(std::size_t)i] = 0.0;
          for (std::int64_t y = 0; y < rows; ++y) {
            double* row = plane.data() + (y + 1) * (cols + 1);
            row[0] = 0.0;
            const std::int64_t sy = cy0 + y;
            double running = 0.0;
            for (std::int64_t x = 0; x < cols; ++x) {
              const std::int64_t sx = cx0 + x;
              double d2 = 0.0;
              for (std::int64_t ch = 0; ch < g.c; ++ch) {
                const double d =
                    static_cast<double>(base.at(ch, sy, sx)) -
                    static_cast<double>(cand.at(ch, sy + dy, sx + dx));
                d2 += d * d;
              }
              running += d2;
              row[x + 1] = running;
            }
            const double* prev = plane.data() + y * (cols + 1);
            for (std::int64_t x = 1; x <= cols; ++x) row[x] += prev[x];
          }
          body(t, dy, dx, qylo, qyhi, qxlo, qxhi, cy0, cx0, cols, cand);
        }
      }
    }
  };

  const auto box_sum = [&](std::int64_t qy, std::int64_t qx, std::int64_t cy0,
                           std::int64_t cx0, std::int64_t cols) {
    const std::int64_t y0 = qy - g.r - cy0, x0 = qx - g.r - cx0;
    const std::int64_t y1 = y0 + 2 * g.r + 1, x1 = x0 + 2 * g.r + 1;
    const double* p = plane.data();
    return p[y1 * (cols + 1) + x1] - p[y0 * (cols + 1) + x1] -
           p[y1 * (cols + 1) + x0] + p[y0 * (cols + 1) + x0];
  };

  // Sweep 1: n-th smallest approximate distance per query, plus a global
  // absolute bound on |box sum - canonical sum| derived from prefix totals.
  for_each_plane([&](std::int64_t t, std::int64_t dy, std::int64_t dx,
                     std::int64_t qylo, std::int64_t qyhi, std::int64_t qxlo,
                     std::int64_t qxhi, std::int64_t cy0, std::int64_t cx0,
                     std::int64_t cols, const detail::PaddedFrame&) {
    const std::int64_t rows = (qyhi + g.r) - cy0 + 1;
    const double total = plane[static_cast<std::size_t>(rows * (cols + 1) +
                                                        cols)];
    const double plane_err =
        16.0 * static_cast<double>(rows + cols + 8) * DBL_EPSILON * total;
    err_bound = std::max(err_bound, plane_err);
    for (std::int64_t qy = qylo; qy <= qyhi; ++qy) {
      const std::int64_t ri = qy + g.margin;
      for (std::int64_t qx = qxlo; qx <= qxhi; ++qx) {
        if (t == g.t0 && dy == 0 && dx == 0) continue;
        const std::int64_t qi = ri * gw + qx + g.margin;
        ++cand_counts[static_cast<std::size_t>(qi)];
        detail::heap_offer(heaps.data() + qi * n,
                           heap_sizes[static_cast<std::size_t>(qi)], n,
                           box_sum(qy, qx, cy0, cx0, cols));
      }
    }
  });

  for (std::int64_t qi = 0; qi < gh * gw; ++qi)
    require(cand_counts[static_cast<std::size_t>(qi)] >= n,
            "query at flat index ", std::to_string(qi), " has only ",
            std::to_string(cand_counts[static_cast<std::size_t>(qi)]),
            " candidates, need ", std::to_string(n));

  // Sweep 2: canonical re-evaluation of everything within the margin.
  std::vector<std::vector<NeighborCandidate>> shortlists(
      static_cast<std::size_t>(gh * gw));
  for_each_plane([&](std::int64_t t, std::int64_t dy, std::int64_t dx,
                     std::int64_t qylo, std::int64_t qyhi, std::int64_t qxlo,
                     std::int64_t qxhi, std::int64_t cy0, std::int64_t cx0,
                     std::int64_t cols, const detail::PaddedFrame& cand) {
    for (std::int64_t qy = qylo; qy <= qyhi; ++qy) {
      const std::int64_t ri = qy + g.margin;
      for (std::int64_t qx = qxlo; qx <= qxhi; ++qx) {
        if (t == g.t0 && dy == 0 && dx == 0) continue;
        const std::int64_t qi = ri * gw + qx + g.margin;
        const double threshold =
            heaps[static_cast<std::size_t>(qi * n)] + 2.0 * err_bound;
        if (box_sum(qy, qx, cy0, cx0, cols) > threshold) continue;
        shortlists[static_cast<std::size_t>(qi)].push_back(
            {detail::patch_ssd_padded(base, qy, qx, cand, qy + dy, qx + dx,
                                      g.r),
             static_cast<std::int32_t>(t), static_cast<std::int32_t>(qy + dy),
             static_cast<std::int32_t>(qx + dx)});
      }
    }
  });

  parallel_for(0, gh * gw, [&](std::int64_t qi) {
    auto& s = shortlists[static_cast<std::size_t>(qi)];
    require(static_cast<std::int64_t>(s.size()) >= n,
            "internal shortlist underflow at query ", std::to_string(qi));
    std::sort(s.begin(), s.end(),
              [&](const NeighborCandidate& a, const NeighborCandidate& b) {
                return candidate_less(a, b, g.t0);
              });
    Neighbor* out = map.entries.data() + qi * n;
    for (std::int64_t k = 0; k < n; ++k)
      out[k] = {s[static_cast<std::size_t>(k)].t,
                s[static_cast<std::size_t>(k)].y,
                s[static_cast<std::size_t>(k)].x,
                static_cast<float>(s[static_cast<std::size_t>(k)].dist)};
  });
  return map;
}

// Cache form: positions as a rank-4 tensor (grid_h, grid_w, n, 3) holding
// (t, y, x) as exact small integers in f32, distances as rank-3
// (grid_h, grid_w, n). Grid metadata (t0, margin) travels alongside.
inline std::pair<Tensor, Tensor> neighbor_map_to_tensors(
    const NeighborMap& map) {
  const std::int64_t gh = map.grid_h(), gw = map.grid_w();
  Tensor pos({gh, gw, map.n, 3});
  Tensor dist({gh, gw, map.n});
  for (std::int64_t i = 0; i < gh * gw * map.n; ++i) {
    const Neighbor& e = map.entries[static_cast<std::size_t>(i)];
    pos[i * 3 + 0] = static_cast<float>(e.t);
    pos[i * 3 + 1] = static_cast<float>(e.y);
    pos[i * 3 + 2] = static_cast<float>(e.x);
    dist[i] = e.dist;
  }
  return {std::move(pos), std::move(dist)};
}

inline NeighborMap neighbor_map_from_tensors(const Tensor& pos,
                                             const Tensor& dist,
                                             std::int64_t t0,
                                             std::int64_t margin) {
  require(pos.rank() == 4 && pos.dim(3) == 3,
          "neighbor position tensor must be (gh,gw,n,3), got ",
          pos.shape_string());
  require(dist.rank() == 3 && dist.dim(0) == pos.dim(0) &&
              dist.dim(1) == pos.dim(1) && dist.dim(2) == pos.dim(2),
          "neighbor distance tensor must be (gh,gw,n) matching positions");
  NeighborMap map;
  map.t0 = t0;
  map.margin = margin;
  map.frame_h = pos.dim(0) - 2 * margin;
  map.frame_w = pos.dim(1) - 2 * margin;
  map.n = pos.dim(2);
  require(map.frame_h > 0 && map.frame_w > 0,
          "margin inconsistent with grid size");
  const std::int64_t count = pos.dim(0) * pos.dim(1) * map.n;
  map.entries.resize(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i)
    map.entries[static_cast<std::size_t>(i)] = {
        static_cast<std::int32_t>(pos[i * 3 + 0]),
        static_cast<std::int32_t>(pos[i * 3 + 1]),
        static_cast<std::int32_t>(pos[i * 3 + 2]), dist[i]};
  return map;
}

}  // namespace pacnet
