#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "interdoc/error.hpp"

namespace interdoc::binary {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_le(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_f32(std::ostream& out, float f) { put(out, std::bit_cast<std::uint32_t>(f)); }

template <class T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) throw Error(ErrorKind::Truncated, what);
  return to_le(v);
}

inline float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get<std::uint32_t>(in, what));
}

inline std::string get_bytes(std::istream& in, std::size_t n, const std::string& what) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) throw Error(ErrorKind::Truncated, what);
  return s;
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  char m[4] = {};
  in.read(m, 4);
  if (in.gcount() != 4) throw Error(ErrorKind::Truncated, "magic");
  if (std::string_view(m, 4) != magic) throw Error(ErrorKind::BadMagic, std::string(m, 4));
}

}  // namespace interdoc::binary
