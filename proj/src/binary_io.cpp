#include "binary_io.hpp"

#include <bit>
#include <cstring>

namespace protofg3d::io {

void BinaryWriter::put(std::uint64_t v, int width) {
  char buf[8];
  for (int i = 0; i < width; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os_.write(buf, width);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

std::uint64_t BinaryReader::get(int width, const char* what) {
  unsigned char buf[8];
  is_.read(reinterpret_cast<char*>(buf), width);
  if (is_.gcount() != width)
    throw Error(truncation_, source_ + ": unexpected end of file while reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::string BinaryReader::bytes(std::size_t n, const char* what) {
  std::string out(n, '\0');
  is_.read(out.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is_.gcount()) != n)
    throw Error(truncation_, source_ + ": unexpected end of file while reading " + what);
  return out;
}

float BinaryReader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }

bool BinaryReader::at_end() { return is_.peek() == std::char_traits<char>::eof(); }

}  // namespace protofg3d::io
