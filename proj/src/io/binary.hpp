#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>

#include "falkon/error.hpp"

namespace falkon::detail {

// Little-endian scalar I/O.
template <typename U>
void put(std::ostream& out, U v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(U)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.write(reinterpret_cast<const char*>(bits.data()), sizeof(U));
}

template <typename U>
U get(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(U)> bits;
  if (!in.read(reinterpret_cast<char*>(bits.data()), sizeof(U)))
    throw ParseError(source + ": file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<U>(bits);
}

template <typename U>
void get_array(std::istream& in, U* out, std::size_t count, const std::string& source) {
  if (!in.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(count * sizeof(U))))
    throw ParseError(source + ": file is truncated");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) {
      auto bits = std::bit_cast<std::array<unsigned char, sizeof(U)>>(out[i]);
      std::reverse(bits.begin(), bits.end());
      out[i] = std::bit_cast<U>(bits);
    }
  }
}

}  // namespace falkon::detail
