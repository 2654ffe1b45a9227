#pragma once

// Little-endian primitive readers/writers shared by the file formats.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "protofg3d/error.hpp"

namespace protofg3d::io {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(std::string_view data) { os_.write(data.data(), static_cast<std::streamsize>(data.size())); }
  void u8(std::uint8_t v) { put(v, 1); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f32(float v);

 private:
  void put(std::uint64_t v, int width);
  std::ostream& os_;
};

/// Reads fail with `truncation_code` when the stream ends early.
class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string source, ErrorCode truncation_code = ErrorCode::FormatMismatch)
      : is_(is), source_(std::move(source)), truncation_(truncation_code) {}

  void set_truncation_code(ErrorCode code) { truncation_ = code; }
  const std::string& source() const { return source_; }

  std::string bytes(std::size_t n, const char* what);
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::int64_t i64(const char* what) { return static_cast<std::int64_t>(get(8, what)); }
  float f32(const char* what);
  bool at_end();

 private:
  std::uint64_t get(int width, const char* what);
  std::istream& is_;
  std::string source_;
  ErrorCode truncation_;
};

}  // namespace protofg3d::io
