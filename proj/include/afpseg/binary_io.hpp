#pragma once

// Little-endian primitives for the AFPD / AFPW containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "afpseg/error.hpp"

namespace afpseg::io {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

inline constexpr std::uint16_t kLittleEndianTag = 0x0001;

class Writer {
 public:
  Writer(std::ostream& os, std::string path) : os_(os), path_(std::move(path)) {}

  void bytes(const void* data, std::size_t n) {
    os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!os_) throw FileError(path_, "write failed");
  }
  template <class T>
  void scalar(T v) {
    bytes(&v, sizeof v);
  }
  void u8(std::uint8_t v) { scalar(v); }
  void u16(std::uint16_t v) { scalar(v); }
  void u32(std::uint32_t v) { scalar(v); }
  void magic(const char (&tag)[5]) { bytes(tag, 4); }
  void string_u32(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void string_u16(const std::string& s) {
    if (s.size() > 0xFFFF) throw FileError(path_, "string too long for u16 length prefix");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void floats(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }

 private:
  std::ostream& os_;
  std::string path_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  void bytes(void* data, std::size_t n) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FileError(path_, "unexpected end of file");
  }
  template <class T>
  T scalar() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint8_t u8() { return scalar<std::uint8_t>(); }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  void expect_magic(const char (&tag)[5]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, tag, 4) != 0) throw FileError(path_, std::string("bad magic, expected ") + tag);
  }
  std::string string_u32() { return string_n(u32()); }
  std::string string_u16() { return string_n(u16()); }
  void floats(std::span<float> v) { bytes(v.data(), v.size_bytes()); }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string string_n(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  std::istream& is_;
  std::string path_;
};

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FileError(path, "cannot open for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileError(path, "cannot open for reading");
  return is;
}

}  // namespace afpseg::io
