#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "pacnet/common.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Binary PPM (P6), maxval 255 only. Reading maps byte v to v/255; writing
// maps x to round-half-up(clamp(x,0,1)*255). Files we emit use the canonical
// header "P6\n<w> <h>\n255\n", so write(read(f)) == f for canonical files.

namespace detail {

struct PpmCursor {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::string origin;

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(cat(origin, ": ", what, " at byte offset ",
                        std::to_string(pos)));
  }

  int peek() const {
    return pos < bytes.size() ? static_cast<unsigned char>(bytes[pos]) : -1;
  }
  int take() {
    if (pos >= bytes.size()) fail("unexpected end of file");
    return static_cast<unsigned char>(bytes[pos++]);
  }

  // PPM whitespace, with '#' comments running to end of line.
  void skip_space_and_comments() {
    for (;;) {
      int c = peek();
      if (c == '#') {
        while (c != -1 && c != '\n') {
          ++pos;
          c = peek();
        }
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n' ||
                 c == '\f' || c == '\v') {
        ++pos;
      } else {
        return;
      }
    }
  }

  std::int64_t take_number(const char* what) {
    skip_space_and_comments();
    if (peek() < '0' || peek() > '9')
      fail(cat("expected ", what, " digits"));
    std::int64_t v = 0;
    while (peek() >= '0' && peek() <= '9') {
      v = v * 10 + (take() - '0');
      if (v > 1000000000) fail(cat(what, " out of range"));
    }
    return v;
  }
};

}  // namespace detail

inline Tensor decode_ppm(const std::string& bytes,
                         const std::string& origin = "<memory>") {
  detail::PpmCursor cur{bytes, 0, origin};
  if (cur.take() != 'P' || cur.take() != '6') {
    cur.pos = 0;
    cur.fail("not a P6 PPM (bad magic)");
  }
  const std::int64_t w = cur.take_number("width");
  const std::int64_t h = cur.take_number("height");
  const std::int64_t maxval = cur.take_number("maxval");
  if (w <= 0 || h <= 0) cur.fail("non-positive dimensions");
  if (maxval != 255) cur.fail("unsupported maxval (only 255)");
  // Exactly one whitespace byte separates the header from the payload.
  int sep = cur.take();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    cur.fail("missing whitespace after maxval");
  const std::size_t need = static_cast<std::size_t>(w) *
                           static_cast<std::size_t>(h) * 3u;
  if (bytes.size() - cur.pos < need) {
    const std::size_t have = bytes.size() - cur.pos;
    cur.pos = bytes.size();
    cur.fail(cat("truncated pixel payload (need ", std::to_string(need),
                 " bytes, have ", std::to_string(have), ")"));
  }
  if (bytes.size() - cur.pos > need) cur.fail("trailing bytes after payload");
  Tensor t({3, h, w});
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) +
                  cur.pos;
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c)
        t.at(c, y, x) = static_cast<float>(*p++) / 255.0f;
  return t;
}

inline std::uint8_t quantize_unit_to_byte(double v) {
  v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  const double scaled = std::floor(v * 255.0 + 0.5);  // round half up
  return static_cast<std::uint8_t>(scaled);
}

inline std::string encode_ppm(const Tensor& t) {
  require(t.rank() == 3 && (t.dim(0) == 3 || t.dim(0) == 1),
          "ppm tensor must be (3,H,W) or (1,H,W), got ", t.shape_string());
  const std::int64_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  std::string out = cat("P6\n", std::to_string(w), " ", std::to_string(h),
                        "\n255\n");
  out.reserve(out.size() + static_cast<std::size_t>(h * w * 3));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t k = 0; k < 3; ++k) {
        const float v = t.at(c == 1 ? 0 : k, y, x);
        out.push_back(static_cast<char>(
            quantize_unit_to_byte(static_cast<double>(v))));
      }
  return out;
}

inline Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open for reading: ", path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return decode_ppm(bytes, path.string());
}

inline void write_ppm(const Tensor& t, const std::filesystem::path& path) {
  const std::string bytes = encode_ppm(t);
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: ", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), "write failed: ", path.string());
}

}  // namespace pacnet
