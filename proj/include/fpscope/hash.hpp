#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace fpscope {

inline constexpr std::uint64_t kFnv64Offset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnv64Prime = 0x100000001b3ULL;

// FNV-1a, 64-bit. Incremental so that binary records can be hashed in pieces.
class Fnv1a64 {
 public:
  constexpr Fnv1a64& update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) step(c);
    return *this;
  }
  constexpr Fnv1a64& update(std::span<const std::uint8_t> bytes) noexcept {
    for (std::uint8_t c : bytes) step(c);
    return *this;
  }
  // Little-endian byte order regardless of host.
  constexpr Fnv1a64& update_u64(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) step(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  constexpr std::uint64_t digest() const noexcept { return state_; }

 private:
  constexpr void step(std::uint8_t c) noexcept {
    state_ ^= c;
    state_ *= kFnv64Prime;
  }
  std::uint64_t state_ = kFnv64Offset;
};

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  return Fnv1a64{}.update(bytes).digest();
}

}  // namespace fpscope
