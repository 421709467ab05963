#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pacnet {

// Error taxonomy mirrors the CLI exit codes: usage 1, data 2, numeric 3.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_into(std::ostringstream& oss, T&& head, Rest&&... rest) {
  oss << std::forward<T>(head);
  format_into(oss, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream oss;
  detail::format_into(oss, std::forward<Args>(args)...);
  return oss.str();
}

template <typename... Args>
void require(bool cond, Args&&... msg) {
  if (!cond) throw DataError(cat(std::forward<Args>(msg)...));
}

// FNV-1a 64-bit. Used for cache keys and corruption checks on serialized
// artifacts; not a cryptographic hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace pacnet
