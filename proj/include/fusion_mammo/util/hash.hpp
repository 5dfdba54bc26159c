#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace fusion_mammo {

/// Incremental 64-bit FNV-1a. Used for fingerprints and id hashing, never for security.
class Fnv1a {
 public:
  Fnv1a& update(std::span<const std::byte> bytes) {
    for (std::byte b : bytes) {
      state_ ^= static_cast<std::uint8_t>(b);
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }
  Fnv1a& update(std::string_view text) {
    return update(std::as_bytes(std::span(text.data(), text.size())));
  }
  template <class T>
  Fnv1a& update_values(std::span<const T> values) {
    return update(std::as_bytes(values));
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv1a(std::string_view text) { return Fnv1a{}.update(text).digest(); }

std::string to_hex(std::uint64_t value);

}  // namespace fusion_mammo
