#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "ercmc/error.hpp"

namespace ercmc {

// Writes through a sibling temp file and renames it into place, so readers
// never observe a partial file.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& body, bool binary = false);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

namespace le {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename U>
U byteswap_if_big(U value) {
  if constexpr (std::endian::native == std::endian::little || sizeof(U) == 1) {
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
void put(std::ostream& out, U value) {
  value = byteswap_if_big(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

inline void put_f32(std::ostream& out, float value) { put(out, std::bit_cast<std::uint32_t>(value)); }

template <typename U>
U get(std::istream& in, const char* what) {
  U value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(U));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(U))) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return byteswap_if_big(value);
}

inline float get_f32(std::istream& in, const char* what) {
  return std::bit_cast<float>(get<std::uint32_t>(in, what));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const char* what, std::size_t limit = 1u << 28) {
  const auto n = get<std::uint32_t>(in, what);
  if (n > limit) throw FormatError(std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return s;
}

}  // namespace le
}  // namespace ercmc
