#pragma once

// Little-endian primitives shared by every binary format in the project.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "futopic/error.hpp"

namespace futopic::binio {

template <typename T>
  requires std::is_integral_v<T>
void put_le(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto v = static_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  out.write(buf.data(), buf.size());
}

inline void put_f64(std::ostream& out, double value) {
  put_le(out, std::bit_cast<std::uint64_t>(value));
}

inline void put_f32(std::ostream& out, float value) {
  put_le(out, std::bit_cast<std::uint32_t>(value));
}

template <typename T>
  requires std::is_integral_v<T>
T decode_le(const unsigned char* p) {
  using U = std::make_unsigned_t<T>;
  U v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  }
  return static_cast<T>(v);
}

// Returns false on clean EOF before the first byte; throws on a partial read.
template <typename T>
  requires std::is_integral_v<T>
bool try_get_le(std::istream& in, T& value, const std::string& what) {
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  const auto got = in.gcount();
  if (got == 0) return false;
  if (static_cast<std::size_t>(got) != sizeof(T)) {
    throw FormatError("truncated " + what);
  }
  value = decode_le<T>(buf.data());
  return true;
}

template <typename T>
  requires std::is_integral_v<T>
T get_le(std::istream& in, const std::string& what) {
  T value{};
  if (!try_get_le(in, value, what)) throw FormatError("truncated " + what);
  return value;
}

inline double get_f64(std::istream& in, const std::string& what) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

inline float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get_le<std::uint32_t>(in, what));
}

inline std::string get_bytes(std::istream& in, std::size_t n, const std::string& what) {
  std::string s(n, '\0');
  if (n > 0) {
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("truncated " + what);
  }
  return s;
}

}  // namespace futopic::binio
