#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace maculab {

inline constexpr uint64_t kFnvOffsetBasis = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffsetBasis) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffsetBasis) {
  return fnv1a64(s.data(), s.size(), h);
}

/// Hashes the 8 bytes of x in little-endian order regardless of host order.
inline uint64_t fnv1a64_u64(uint64_t x, uint64_t h = kFnvOffsetBasis) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  return fnv1a64(b, 8, h);
}

std::string hash_to_hex(uint64_t h);

/// FNV-1a over a file's raw bytes. Throws std::runtime_error if unreadable.
uint64_t fnv1a64_file(const std::filesystem::path& path);

}  // namespace maculab
