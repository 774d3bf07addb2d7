#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msglab {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteSpan b) {
  return std::string(b.begin(), b.end());
}

inline void append(Bytes& out, ByteSpan more) {
  out.insert(out.end(), more.begin(), more.end());
}

inline Bytes concat(std::initializer_list<ByteSpan> parts) {
  Bytes out;
  for (auto p : parts) append(out, p);
  return out;
}

inline void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline Bytes be64(std::uint64_t v) {
  Bytes out;
  put_u64(out, v);
  return out;
}

// Cursor for parsing the length-prefixed wire formats. Throws
// std::out_of_range past the end; protocol code maps that to its own
// malformed-input errors.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto b = take(2);
    return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
  }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | b[i];
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | b[i];
    return v;
  }
  Bytes bytes(std::size_t n) {
    auto b = take(n);
    return Bytes(b.begin(), b.end());
  }
  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteSpan take(std::size_t n) {
    if (pos_ + n > data_.size()) throw std::out_of_range("wire: short read");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  ByteSpan data_;
  std::size_t pos_ = 0;
};

std::string hex_encode(ByteSpan data);
Bytes hex_decode(std::string_view hex);

// True if `needle` occurs as a contiguous byte substring of `haystack`.
// Used by tests to assert key erasure in serialized state.
bool contains_bytes(ByteSpan haystack, ByteSpan needle);

}  // namespace msglab
