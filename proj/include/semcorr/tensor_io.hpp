#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "semcorr/tensor.hpp"

namespace semcorr {

// Binary tensor layout, little-endian throughout:
//   "SCTN" | u32 rank | u32 dims[rank] | f32 values in row-major order
namespace io_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF),
                              static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xFFFFFFFFu));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(std::string("truncated stream while reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
  const std::uint64_t lo = get_u32(is, what);
  const std::uint64_t hi = get_u32(is, what);
  return lo | (hi << 32);
}

inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const char* what) {
  const std::uint32_t n = get_u32(is, what);
  if (n > (1u << 20)) throw DataError(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw DataError(std::string("truncated string in ") + what);
  return s;
}

}  // namespace io_detail

template <class T>
void write_tensor(std::ostream& os, const BasicTensor<T>& t) {
  os.write("SCTN", 4);
  io_detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) io_detail::put_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) {
    io_detail::put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
  }
}

template <class T = float>
BasicTensor<T> read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SCTN", 4) != 0) {
    throw DataError("bad tensor magic (expected SCTN)");
  }
  const std::uint32_t rank = io_detail::get_u32(is, "tensor rank");
  if (rank == 0 || rank > 8) throw DataError("unsupported tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) {
    const std::uint32_t v = io_detail::get_u32(is, "tensor dims");
    if (v == 0 || v > (1u << 28)) throw DataError("bad tensor dimension " + std::to_string(v));
    d = static_cast<int>(v);
  }
  BasicTensor<T> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>(std::bit_cast<float>(io_detail::get_u32(is, "tensor data")));
  }
  return t;
}

template <class T>
void save_tensor(const std::string& path, const BasicTensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_tensor(os, t);
  if (!os) throw DataError("write failed for " + path);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  return read_tensor<float>(is);
}

}  // namespace semcorr
