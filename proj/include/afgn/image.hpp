#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "afgn/errors.hpp"

namespace afgn {

// Planar float image, values in [0,1], layout [C][H][W].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixels() const { return static_cast<size_t>(width) * height; }
  bool square() const { return width == height; }

  void clamp01() {
    for (float& v : data) v = std::min(1.0f, std::max(0.0f, v));
  }
};

namespace detail {

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  in.seekg(0, std::ios::end);
  std::streamoff len = in.tellg();
  in.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw IoError("cannot read " + path);
  return bytes;
}

// Parses one ASCII integer token, skipping whitespace and '#' comments.
inline long pnm_token(const std::vector<uint8_t>& b, size_t& pos,
                      const std::string& path) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos]))
    throw IoError(path + ": malformed header at byte offset " +
                  std::to_string(pos));
  long v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos] - '0');
    if (v > 1u << 30)
      throw IoError(path + ": header value overflow at byte offset " +
                    std::to_string(pos));
    ++pos;
  }
  return v;
}

inline uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in,
                                         size_t expected,
                                         const std::string& path) {
  std::vector<uint8_t> out(expected);
  z_stream zs;
  std::memset(&zs, 0, sizeof(zs));
  if (inflateInit(&zs) != Z_OK) throw IoError(path + ": inflate init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  size_t produced = out.size() - zs.avail_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected)
    throw IoError(path + ": PNG payload truncated or corrupt (got " +
                  std::to_string(produced) + " of " + std::to_string(expected) +
                  " bytes)");
  return out;
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

inline Image decode_png(const std::vector<uint8_t>& bytes,
                        const std::string& path) {
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0)
    throw IoError(path + ": bad PNG signature at byte offset 0");
  size_t pos = 8;
  uint32_t w = 0, h = 0;
  bool have_ihdr = false, done = false;
  std::vector<uint8_t> idat;
  while (!done) {
    if (pos + 8 > bytes.size())
      throw IoError(path + ": truncated chunk header at byte offset " +
                    std::to_string(pos));
    uint32_t len = be32(&bytes[pos]);
    std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    pos += 8;
    if (pos + len + 4 > bytes.size())
      throw IoError(path + ": truncated chunk payload at byte offset " +
                    std::to_string(pos));
    const uint8_t* payload = &bytes[pos];
    if (type == "IHDR") {
      if (len != 13)
        throw IoError(path + ": bad IHDR length at byte offset " +
                      std::to_string(pos));
      w = be32(payload);
      h = be32(payload + 4);
      int bitdepth = payload[8], colortype = payload[9], interlace = payload[12];
      if (bitdepth != 8 || colortype != 2)
        throw IoError(path + ": unsupported PNG (need 8-bit RGB, got depth " +
                      std::to_string(bitdepth) + " colortype " +
                      std::to_string(colortype) + ")");
      if (interlace != 0)
        throw IoError(path + ": interlaced PNG unsupported");
      have_ihdr = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), payload, payload + len);
    } else if (type == "IEND") {
      done = true;
    }
    pos += len + 4;  // skip CRC
  }
  if (!have_ihdr || w == 0 || h == 0)
    throw IoError(path + ": missing or empty IHDR");

  const size_t stride = static_cast<size_t>(w) * 3;
  std::vector<uint8_t> raw =
      zlib_inflate(idat, (stride + 1) * h, path);

  Image img(static_cast<int>(w), static_cast<int>(h), 3);
  std::vector<uint8_t> prev(stride, 0), cur(stride);
  for (uint32_t y = 0; y < h; ++y) {
    const uint8_t* row = &raw[(stride + 1) * y];
    int filter = row[0];
    const uint8_t* src = row + 1;
    for (size_t x = 0; x < stride; ++x) {
      int a = x >= 3 ? cur[x - 3] : 0;
      int b = prev[x];
      int c = x >= 3 ? prev[x - 3] : 0;
      int v;
      switch (filter) {
        case 0: v = src[x]; break;
        case 1: v = src[x] + a; break;
        case 2: v = src[x] + b; break;
        case 3: v = src[x] + (a + b) / 2; break;
        case 4: v = src[x] + paeth(a, b, c); break;
        default:
          throw IoError(path + ": unknown PNG filter " +
                        std::to_string(filter) + " in row " + std::to_string(y));
      }
      cur[x] = static_cast<uint8_t>(v & 0xFF);
    }
    for (uint32_t x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img.at(ch, static_cast<int>(y), static_cast<int>(x)) =
            cur[x * 3 + ch] / 255.0f;
    std::swap(prev, cur);
  }
  return img;
}

inline Image decode_ppm(const std::vector<uint8_t>& bytes,
                        const std::string& path) {
  size_t pos = 2;  // past "P6"
  long w = pnm_token(bytes, pos, path);
  long h = pnm_token(bytes, pos, path);
  long maxval = pnm_token(bytes, pos, path);
  if (w <= 0 || h <= 0)
    throw IoError(path + ": bad dimensions " + std::to_string(w) + "x" +
                  std::to_string(h));
  if (maxval != 255)
    throw IoError(path + ": unsupported maxval " + std::to_string(maxval) +
                  " (only 255)");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw IoError(path + ": missing header terminator at byte offset " +
                  std::to_string(pos));
  ++pos;
  size_t need = static_cast<size_t>(w) * h * 3;
  if (bytes.size() - pos < need)
    throw IoError(path + ": pixel payload truncated at byte offset " +
                  std::to_string(bytes.size()) + " (need " +
                  std::to_string(pos + need) + " bytes)");
  Image img(static_cast<int>(w), static_cast<int>(h), 3);
  const uint8_t* px = &bytes[pos];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = px[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0f;
  return img;
}

}  // namespace detail

// Loads a binary PPM (P6, maxval 255) or an 8-bit RGB PNG. Pixels land in
// [0,1]; malformed input is rejected with the offending byte offset.
inline Image load_image(const std::string& path) {
  std::vector<uint8_t> bytes = detail::read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6')
    return detail::decode_ppm(bytes, path);
  if (bytes.size() >= 8 && bytes[0] == 137 && bytes[1] == 'P')
    return detail::decode_png(bytes, path);
  throw IoError(path + ": unrecognized format at byte offset 0 "
                       "(expected P6 PPM or PNG)");
}

inline uint8_t quantize_byte(float v) {
  float scaled = std::min(1.0f, std::max(0.0f, v)) * 255.0f;
  return static_cast<uint8_t>(std::lround(scaled));
}

inline void save_ppm(const Image& img, const std::string& path) {
  if (img.channels != 3)
    throw ValueError("save_ppm: need 3 channels, got " +
                     std::to_string(img.channels));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        row[static_cast<size_t>(x) * 3 + c] = quantize_byte(img.at(c, y, x));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed for " + path);
}

// Single-channel 8-bit PGM; multi-channel images are averaged.
inline void save_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      float v = 0.0f;
      for (int c = 0; c < img.channels; ++c) v += img.at(c, y, x);
      row[static_cast<size_t>(x)] = quantize_byte(v / img.channels);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed for " + path);
}

// Bilinear resize with half-pixel centers; a same-size resize is identity.
inline Image resize(const Image& src, int side) {
  if (side < 8) throw ValueError("resize: target side must be >= 8");
  Image dst(side, side, src.channels);
  const float sx = static_cast<float>(src.width) / side;
  const float sy = static_cast<float>(src.height) / side;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < side; ++y) {
      float fy = (y + 0.5f) * sy - 0.5f;
      fy = std::min(std::max(fy, 0.0f), static_cast<float>(src.height - 1));
      int y0 = static_cast<int>(fy);
      int y1 = std::min(y0 + 1, src.height - 1);
      float wy = fy - y0;
      for (int x = 0; x < side; ++x) {
        float fx = (x + 0.5f) * sx - 0.5f;
        fx = std::min(std::max(fx, 0.0f), static_cast<float>(src.width - 1));
        int x0 = static_cast<int>(fx);
        int x1 = std::min(x0 + 1, src.width - 1);
        float wx = fx - x0;
        float top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        float bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

}  // namespace afgn
