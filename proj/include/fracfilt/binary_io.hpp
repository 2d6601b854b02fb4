#pragma once

// Little-endian primitives for the binary file formats. Readers track their
// byte offset so that parse errors can say where a file went wrong.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "fracfilt/error.hpp"

namespace fracfilt::io {

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  std::uint64_t offset() const noexcept { return offset_; }

  template <class T>
  T read(const char* field) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char buf[sizeof(T)];
    read_bytes(buf, sizeof(T), field);
    using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

  void read_bytes(void* dst, std::size_t n, const char* field) {
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(is_.gcount());
    if (got != n) fail(std::string("truncated ") + what_ + ": expected " + std::to_string(n) + " bytes of " + field);
    offset_ += n;
  }

  /// True when no bytes remain.
  bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, offset_, ParseError::Unit::Byte); }

 private:
  std::istream& is_;
  std::string what_;
  std::uint64_t offset_ = 0;
};

}  // namespace fracfilt::io
