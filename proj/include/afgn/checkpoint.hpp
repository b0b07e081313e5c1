#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "afgn/errors.hpp"
#include "afgn/tensor.hpp"

namespace afgn {

// Checkpoint container (shared repo-wide):
//   magic "AFGN", u32 version=1, u32 tensor count, then per tensor:
//   u16 name length, UTF-8 name, u8 rank, u32 extents, f32 LE payload.
struct NamedTensor {
  std::string name;
  std::vector<size_t> shape;
  std::vector<float> data;

  static NamedTensor scalar(std::string name, float v) {
    return {std::move(name), {1}, {v}};
  }
  static NamedTensor vec(std::string name, std::vector<float> v) {
    return {std::move(name), {v.size()}, std::move(v)};
  }
};

namespace detail {

inline void put_u16(std::ofstream& out, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

inline void put_u32(std::ofstream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

inline void put_f32(std::ofstream& out, const float* vals, size_t n) {
  // explicit little-endian encoding
  std::vector<char> buf(n * 4);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &vals[i], 4);
    for (int j = 0; j < 4; ++j)
      buf[i * 4 + j] = static_cast<char>((bits >> (8 * j)) & 0xFF);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

struct ByteReader {
  std::vector<char> bytes;
  size_t pos = 0;
  std::string path;

  void need(size_t n, const char* what) const {
    if (pos + n > bytes.size())
      throw IoError(path + ": truncated checkpoint while reading " +
                    std::string(what) + " at byte offset " +
                    std::to_string(pos));
  }
  uint16_t u16() {
    need(2, "u16");
    uint16_t v = static_cast<uint8_t>(bytes[pos]) |
                 (static_cast<uint16_t>(static_cast<uint8_t>(bytes[pos + 1]))
                  << 8);
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4, "u32");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  uint8_t u8() {
    need(1, "u8");
    return static_cast<uint8_t>(bytes[pos++]);
  }
  std::string str(size_t n) {
    need(n, "name");
    std::string s(bytes.data() + pos, n);
    pos += n;
    return s;
  }
  void f32(float* dst, size_t n) {
    need(n * 4, "payload");
    for (size_t i = 0; i < n; ++i) {
      uint32_t bits = 0;
      for (int j = 0; j < 4; ++j)
        bits |= static_cast<uint32_t>(
                    static_cast<uint8_t>(bytes[pos + i * 4 + j]))
                << (8 * j);
      std::memcpy(&dst[i], &bits, 4);
    }
    pos += n * 4;
  }
};

}  // namespace detail

inline void write_checkpoint(const std::string& path,
                             const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write("AFGN", 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF)
      throw ValueError("tensor name too long: " + t.name);
    detail::put_u16(out, static_cast<uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    if (t.shape.size() > 0xFF)
      throw ValueError("tensor rank too large for " + t.name);
    out.put(static_cast<char>(t.shape.size()));
    size_t numel = 1;
    for (size_t e : t.shape) {
      detail::put_u32(out, static_cast<uint32_t>(e));
      numel *= e;
    }
    if (numel != t.data.size())
      throw ValueError("tensor " + t.name + " shape/payload mismatch");
    detail::put_f32(out, t.data.data(), t.data.size());
  }
  if (!out) throw IoError("write failed for checkpoint " + path);
}

inline std::vector<NamedTensor> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  detail::ByteReader r;
  r.path = path;
  in.seekg(0, std::ios::end);
  r.bytes.resize(static_cast<size_t>(in.tellg()));
  in.seekg(0);
  in.read(r.bytes.data(), static_cast<std::streamsize>(r.bytes.size()));
  if (!in) throw IoError("cannot read checkpoint " + path);

  r.need(4, "magic");
  if (std::memcmp(r.bytes.data(), "AFGN", 4) != 0)
    throw IoError(path + ": bad checkpoint magic");
  r.pos = 4;
  uint32_t version = r.u32();
  if (version != 1)
    throw IoError(path + ": unsupported checkpoint version " +
                  std::to_string(version));
  uint32_t count = r.u32();
  std::vector<NamedTensor> tensors(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor& t = tensors[i];
    t.name = r.str(r.u16());
    uint8_t rank = r.u8();
    size_t numel = 1;
    t.shape.resize(rank);
    for (uint8_t d = 0; d < rank; ++d) {
      t.shape[d] = r.u32();
      if (t.shape[d] == 0) throw IoError(path + ": zero extent in " + t.name);
      numel *= t.shape[d];
    }
    t.data.resize(numel);
    r.f32(t.data.data(), numel);
  }
  if (r.pos != r.bytes.size())
    throw IoError(path + ": trailing bytes after checkpoint payload at " +
                  std::to_string(r.pos));
  return tensors;
}

// Meta lookup helpers; models persist structural facts as reserved tensors.
inline const NamedTensor* find_tensor(const std::vector<NamedTensor>& ts,
                                      const std::string& name) {
  for (const auto& t : ts)
    if (t.name == name) return &t;
  return nullptr;
}

inline const NamedTensor& require_tensor(const std::vector<NamedTensor>& ts,
                                         const std::string& name,
                                         const std::string& path) {
  const NamedTensor* t = find_tensor(ts, name);
  if (!t) throw IoError(path + ": checkpoint is missing tensor '" + name + "'");
  return *t;
}

inline float meta_scalar(const std::vector<NamedTensor>& ts,
                         const std::string& name, const std::string& path) {
  const NamedTensor& t = require_tensor(ts, name, path);
  if (t.data.size() != 1)
    throw IoError(path + ": meta tensor '" + name + "' is not scalar");
  return t.data[0];
}

}  // namespace afgn
