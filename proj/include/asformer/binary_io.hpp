#pragma once

#include "asformer/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace asformer::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Sequential reader that tracks the byte offset for error reporting.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::size_t offset() const noexcept { return offset_; }

  void read_bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw ParseError(ParseError::Reason::kTruncated, offset_ + got,
                       std::string("truncated ") + what + ": expected " + std::to_string(n) +
                           " bytes, got " + std::to_string(got));
    }
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    T value;
    read_bytes(reinterpret_cast<char*>(&value), sizeof(T), what);
    return value;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

}  // namespace asformer::binio
