#pragma once

// Little-endian primitives for the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sfn/error.hpp"

namespace sfn::binary {

template <typename U>
U to_little(U value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    U out{};
    auto* src = reinterpret_cast<const unsigned char*>(&value);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(U); ++i) dst[i] = src[sizeof(U) - 1 - i];
    return out;
  }
}

template <typename U>
void put(std::ostream& os, U value) {
  value = to_little(value);
  os.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

inline void put_f32(std::ostream& os, float value) {
  put(os, std::bit_cast<std::uint32_t>(value));
}

template <typename U>
U get(std::istream& is, const std::string& what) {
  U value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(U))) {
    fail(ErrorCode::format, "truncated " + what);
  }
  return to_little(value);
}

inline float get_f32(std::istream& is, const std::string& what) {
  return std::bit_cast<float>(get<std::uint32_t>(is, what));
}

}  // namespace sfn::binary
