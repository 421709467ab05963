#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/ppm.hpp"
#include "pacnet/tensor.hpp"
#include "pacnet/tensor_io.hpp"

namespace pacnet {

// Ordered frames sharing one (C,H,W). Values are in [0,1] when ingested from
// 8-bit PPM; sequences carrying unclipped noise (loaded from PCT1 or produced
// in memory) may step outside that range and only finiteness is enforced.
struct FrameSequence {
  std::vector<Tensor> frames;

  std::int64_t frame_count() const {
    return static_cast<std::int64_t>(frames.size());
  }
  std::int64_t channels() const { return frames.at(0).dim(0); }
  std::int64_t height() const { return frames.at(0).dim(1); }
  std::int64_t width() const { return frames.at(0).dim(2); }

  void validate() const {
    require(!frames.empty(), "frame sequence is empty");
    for (std::size_t i = 0; i < frames.size(); ++i) {
      require(frames[i].rank() == 3, "frame ", std::to_string(i),
              " must be rank 3, got ", frames[i].shape_string());
      require(frames[i].same_shape(frames[0]), "frame ", std::to_string(i),
              " shape ", frames[i].shape_string(),
              " differs from frame 0 shape ", frames[0].shape_string());
      require(frames[i].all_finite(), "frame ", std::to_string(i),
              " contains non-finite values");
    }
  }
};

inline Tensor to_grayscale(const Tensor& frame) {
  require(frame.rank() == 3, "frame must be rank 3");
  if (frame.dim(0) == 1) return frame;
  Tensor out({1, frame.dim(1), frame.dim(2)});
  const std::int64_t c = frame.dim(0);
  for (std::int64_t y = 0; y < frame.dim(1); ++y)
    for (std::int64_t x = 0; x < frame.dim(2); ++x) {
      double acc = 0.0;
      for (std::int64_t k = 0; k < c; ++k)
        acc += static_cast<double>(frame.at(k, y, x));
      out.at(0, y, x) = static_cast<float>(acc / static_cast<double>(c));
    }
  return out;
}

inline Tensor sequence_to_tensor(const FrameSequence& seq) {
  seq.validate();
  Tensor t({seq.frame_count(), seq.channels(), seq.height(), seq.width()});
  const std::int64_t per = seq.frames[0].size();
  for (std::int64_t f = 0; f < seq.frame_count(); ++f)
    for (std::int64_t i = 0; i < per; ++i)
      t[f * per + i] = seq.frames[static_cast<std::size_t>(f)][i];
  return t;
}

inline FrameSequence tensor_to_sequence(const Tensor& t) {
  require(t.rank() == 4, "sequence tensor must be rank 4 (T,C,H,W), got ",
          t.shape_string());
  FrameSequence seq;
  const std::int64_t per = t.dim(1) * t.dim(2) * t.dim(3);
  for (std::int64_t f = 0; f < t.dim(0); ++f) {
    Tensor frame({t.dim(1), t.dim(2), t.dim(3)});
    for (std::int64_t i = 0; i < per; ++i) frame[i] = t[f * per + i];
    seq.frames.push_back(std::move(frame));
  }
  seq.validate();
  return seq;
}

// A sequence on disk is either a directory of frame_%05d.ppm (sorted
// lexicographically) or a single PCT1 file holding a rank-4 (T,C,H,W) tensor.
inline FrameSequence load_sequence(const std::filesystem::path& path,
                                   bool grayscale = false) {
  FrameSequence seq;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".ppm")
        files.push_back(entry.path());
    require(!files.empty(), "no .ppm frames in directory ", path.string());
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) {
                return a.filename().string() < b.filename().string();
              });
    for (const auto& f : files) seq.frames.push_back(read_ppm(f));
  } else {
    require(std::filesystem::exists(path), "no such sequence: ",
            path.string());
    seq = tensor_to_sequence(read_tensor_file(path));
  }
  if (grayscale)
    for (auto& f : seq.frames) f = to_grayscale(f);
  seq.validate();
  return seq;
}

inline std::string frame_file_name(std::int64_t index) {
  std::string digits = std::to_string(index);
  require(digits.size() <= 5, "frame index too large for naming: ",
          std::to_string(index));
  return cat("frame_", std::string(5 - digits.size(), '0'), digits, ".ppm");
}

inline void save_sequence_ppm(const FrameSequence& seq,
                              const std::filesystem::path& dir) {
  seq.validate();
  std::filesystem::create_directories(dir);
  for (std::int64_t f = 0; f < seq.frame_count(); ++f)
    write_ppm(seq.frames[static_cast<std::size_t>(f)],
              dir / frame_file_name(f));
}

inline void save_sequence_tensor(const FrameSequence& seq,
                                 const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  write_tensor_file(path, sequence_to_tensor(seq));
}

// Half-sample symmetric fold: ...,2,1,0 | 0,1,2,... | n-1,...; period 2n.
inline std::int64_t mirror_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

// Frame sample with mirror extrapolation outside the pixel grid.
inline float mirror_at(const Tensor& frame, std::int64_t c, std::int64_t y,
                       std::int64_t x) {
  return frame.at(c, mirror_index(y, frame.dim(1)),
                  mirror_index(x, frame.dim(2)));
}

}  // namespace pacnet
