#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::io {

/// Appends little-endian encoded values to a byte buffer.
class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::byte>(bits & 0xFF));
      if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
    }
  }

  void put_floats(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto raw = std::as_bytes(values);
      bytes_.insert(bytes_.end(), raw.begin(), raw.end());
    } else {
      for (float v : values) put(v);
    }
  }

  void put_magic(std::string_view magic) {
    for (char c : magic) bytes_.push_back(static_cast<std::byte>(c));
  }

  void put_bytes(std::span<const std::byte> raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }

  /// u32 length followed by raw UTF-8 bytes.
  void put_string32(std::string_view text);
  /// u16 length followed by raw bytes.
  void put_string16(std::string_view text);

  std::size_t size() const { return bytes_.size(); }
  const std::vector<std::byte>& bytes() const { return bytes_; }
  std::vector<std::byte> release() { return std::move(bytes_); }

 private:
  std::vector<std::byte> bytes_;
};

/// Bounds-checked little-endian cursor. Every overrun is a FormatError.
class ByteReader {
 public:
  ByteReader(std::span<const std::byte> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    require(sizeof(T));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits = static_cast<U>(bits | (static_cast<U>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i)));
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  void get_floats(std::span<float> out);
  void expect_magic(std::string_view magic);
  std::string get_string32();
  std::string get_string16();
  std::span<const std::byte> get_bytes(std::size_t n);

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void seek(std::size_t pos);
  void expect_end() const;
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void require(std::size_t n) const;

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
  std::string context_;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a half-written file.
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fusion_mammo::io
