#pragma once

// Little-endian primitives for the BLH1 / BSW1 file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace iqp::binary {

template <typename UInt>
void write_uint(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

inline void write_f64(std::ostream& out, double value) {
  write_uint(out, std::bit_cast<std::uint64_t>(value));
}

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

// Reads one little-endian integer; `what` names the field in the error.
template <typename UInt>
UInt read_uint(std::istream& in, const std::string& what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw CorruptFile("unexpected end of file while reading " + what);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

inline double read_f64(std::istream& in, const std::string& what) {
  return std::bit_cast<double>(read_uint<std::uint64_t>(in, what));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || got != magic) {
    throw CorruptFile("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

inline void expect_eof(std::istream& in) {
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CorruptFile("trailing bytes after end of data");
  }
}

}  // namespace iqp::binary
