#include "fusion_mammo/io/binary.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace fusion_mammo::io {

void ByteWriter::put_string32(std::string_view text) {
  put(static_cast<std::uint32_t>(text.size()));
  put_magic(text);
}

void ByteWriter::put_string16(std::string_view text) {
  if (text.size() > 0xFFFF) throw ArgumentError("string too long for u16 length prefix");
  put(static_cast<std::uint16_t>(text.size()));
  put_magic(text);
}

void ByteReader::require(std::size_t n) const {
  if (n > remaining()) {
    fail("truncated: need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
         ", " + std::to_string(remaining()) + " remain");
  }
}

void ByteReader::fail(const std::string& what) const {
  throw FormatError(context_ + ": " + what);
}

void ByteReader::get_floats(std::span<float> out) {
  require(out.size() * sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(float));
    pos_ += out.size() * sizeof(float);
  } else {
    for (float& v : out) v = get<float>();
  }
}

void ByteReader::expect_magic(std::string_view magic) {
  require(magic.size());
  if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    fail("bad magic bytes, expected \"" + std::string(magic) + "\"");
  }
  pos_ += magic.size();
}

std::string ByteReader::get_string32() {
  const auto n = get<std::uint32_t>();
  const auto raw = get_bytes(n);
  return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
}

std::string ByteReader::get_string16() {
  const auto n = get<std::uint16_t>();
  const auto raw = get_bytes(n);
  return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
}

std::span<const std::byte> ByteReader::get_bytes(std::size_t n) {
  require(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::seek(std::size_t pos) {
  if (pos > bytes_.size()) fail("seek past end to offset " + std::to_string(pos));
  pos_ = pos;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StateError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StateError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StateError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto raw = read_file(path);
  return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
}

}  // namespace fusion_mammo::io
