#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semcorr/tensor_io.hpp"

namespace semcorr {

// Named tensors plus string metadata (network configuration).
//
// File layout, little-endian:
//   "SCKP" | u32 version | u32 n_meta | n_meta x (str key, str value)
//   | u32 n_tensors | n_tensors x (str name, u64 offset, u64 length)
//   | payload: SCTN tensor records; offsets are relative to payload start.
// Strings are u32 length + bytes.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
      if (n == name) return t;
    }
    throw DataError("checkpoint has no tensor named '" + name + "'");
  }

  const std::string& meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint has no metadata key '" + key + "'");
    return it->second;
  }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  std::vector<std::string> blobs;
  for (const auto& [name, t] : ck.tensors) {
    std::ostringstream b(std::ios::binary);
    write_tensor(b, t);
    blobs.push_back(b.str());
  }
  os.write("SCKP", 4);
  io_detail::put_u32(os, kCheckpointVersion);
  io_detail::put_u32(os, static_cast<std::uint32_t>(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    io_detail::put_string(os, k);
    io_detail::put_string(os, v);
  }
  io_detail::put_u32(os, static_cast<std::uint32_t>(ck.tensors.size()));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    io_detail::put_string(os, ck.tensors[i].first);
    io_detail::put_u64(os, offset);
    io_detail::put_u64(os, blobs[i].size());
    offset += blobs[i].size();
  }
  for (const auto& b : blobs) os.write(b.data(), static_cast<std::streamsize>(b.size()));
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "SCKP", 4) != 0) {
    throw DataError("bad checkpoint magic (expected SCKP)");
  }
  const auto version = io_detail::get_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto n_meta = io_detail::get_u32(is, "checkpoint metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = io_detail::get_string(is, "checkpoint metadata");
    ck.meta[k] = io_detail::get_string(is, "checkpoint metadata");
  }
  const auto n_tensors = io_detail::get_u32(is, "checkpoint tensor count");
  struct Entry {
    std::string name;
    std::uint64_t offset, length;
  };
  std::vector<Entry> index;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Entry e;
    e.name = io_detail::get_string(is, "checkpoint index");
    e.offset = io_detail::get_u64(is, "checkpoint index");
    e.length = io_detail::get_u64(is, "checkpoint index");
    index.push_back(std::move(e));
  }
  const std::streampos payload = is.tellg();
  for (const auto& e : index) {
    is.clear();
    is.seekg(payload + static_cast<std::streamoff>(e.offset));
    if (!is) throw DataError("checkpoint offset out of range for '" + e.name + "'");
    ck.tensors.emplace_back(e.name, read_tensor<float>(is));
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  write_checkpoint(os, ck);
  if (!os) throw DataError("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw DataError("expected comma-separated integers, got '" + s + "'");
    }
  }
  return out;
}

}  // namespace semcorr
