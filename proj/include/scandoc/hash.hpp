#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace scandoc {

inline constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvBasis) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnvBasis) {
  return fnv1a(std::string_view(static_cast<const char*>(data), n), h);
}

std::string hex64(std::uint64_t value);

// FNV-1a of a whole file's bytes. Throws EnvironmentError if unreadable.
std::uint64_t hash_file(const std::string& path);

}  // namespace scandoc
