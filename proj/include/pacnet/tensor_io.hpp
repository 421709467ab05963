#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pacnet/common.hpp"
#include "pacnet/tensor.hpp"

namespace pacnet {

// Binary tensor container. Layout, all little-endian:
//   bytes 0..3   magic "PCT1"
//   byte  4      rank (u8, 1..8)
//   next rank*4  dims (u32 each)
//   rest         row-major f32 payload
// Floats are written as their IEEE-754 bit patterns, so a write/read cycle is
// bit-exact including NaN payloads and signed zeros.

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::string serialize_tensor(const Tensor& t) {
  require(t.rank() >= 1 && t.rank() <= 8,
          "tensor rank out of range for serialization: ",
          std::to_string(t.rank()));
  std::string out;
  out.reserve(5 + static_cast<std::size_t>(t.rank()) * 4 +
              static_cast<std::size_t>(t.size()) * 4);
  out += "PCT1";
  out.push_back(static_cast<char>(t.rank()));
  for (std::int64_t i = 0; i < t.rank(); ++i) {
    require(t.dim(i) <= 0xffffffffll, "tensor dimension exceeds u32: ",
            std::to_string(t.dim(i)));
    detail::put_u32le(out, static_cast<std::uint32_t>(t.dim(i)));
  }
  for (std::int64_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits;
    float v = t[i];
    std::memcpy(&bits, &v, 4);
    detail::put_u32le(out, bits);
  }
  return out;
}

inline Tensor deserialize_tensor(const std::string& blob,
                                 const std::string& origin = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  require(blob.size() >= 5, origin, ": truncated tensor header");
  require(std::memcmp(p, "PCT1", 4) == 0, origin, ": bad tensor magic");
  const int rank = static_cast<int>(p[4]);
  require(rank >= 1 && rank <= 8, origin, ": bad tensor rank ",
          std::to_string(rank));
  const std::size_t header = 5 + static_cast<std::size_t>(rank) * 4;
  require(blob.size() >= header, origin, ": truncated tensor dims");
  std::vector<std::int64_t> shape(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i)
    shape[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(
        detail::get_u32le(p + 5 + static_cast<std::size_t>(i) * 4));
  const std::int64_t count = Tensor::element_count(shape);
  require(blob.size() == header + static_cast<std::size_t>(count) * 4, origin,
          ": tensor payload size mismatch (expected ",
          std::to_string(count * 4), " bytes, got ",
          std::to_string(blob.size() - header), ")");
  Tensor t(shape);
  const unsigned char* q = p + header;
  for (std::int64_t i = 0; i < count; ++i) {
    std::uint32_t bits = detail::get_u32le(q + static_cast<std::size_t>(i) * 4);
    float v;
    std::memcpy(&v, &bits, 4);
    t[i] = v;
  }
  return t;
}

inline void write_tensor_file(const std::filesystem::path& path,
                              const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: ", path.string());
  const std::string blob = serialize_tensor(t);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  out.flush();
  require(out.good(), "write failed: ", path.string());
}

inline Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open for reading: ", path.string());
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  require(in.good() || in.eof(), "read failed: ", path.string());
  return deserialize_tensor(blob, path.string());
}

}  // namespace pacnet
