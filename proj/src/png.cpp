// Copyright (c) 2026 the ravg authors
// SPDX-License-Identifier: Apache-2.0

#include "ravg/png.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace ravg {

namespace {

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n, std::uint32_t crc = 0) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  crc ^= 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void chunk(std::vector<std::uint8_t>& out, const char type[4],
           const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, crc32_of(body.data(), body.size()));
}

std::uint8_t srgb8(float v) {
  double x = v;
  if (x < 0.0) x = 0.0;
  if (x > 1.0) x = 1.0;
  const double s = x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
  return static_cast<std::uint8_t>(std::lround(s * 255.0));
}

}  // namespace

void write_png(const std::string& path, const Tensor& image) {
  require(image.rank() == 2 || (image.rank() == 3 && image.dim(0) == 3),
          "write_png: image must be [H,W] or [3,H,W]");
  const bool gray = image.rank() == 2;
  const std::size_t H = image.dim(gray ? 0 : 1), W = image.dim(gray ? 1 : 2);

  // raw scanlines with filter byte 0
  std::vector<std::uint8_t> raw;
  raw.reserve(H * (1 + 3 * W));
  for (std::size_t y = 0; y < H; ++y) {
    raw.push_back(0);
    for (std::size_t x = 0; x < W; ++x) {
      if (gray) {
        const std::uint8_t v = srgb8(image.data()[y * W + x]);
        raw.push_back(v);
        raw.push_back(v);
        raw.push_back(v);
      } else {
        for (std::size_t c = 0; c < 3; ++c)
          raw.push_back(srgb8(image.data()[c * H * W + y * W + x]));
      }
    }
  }

  // zlib stream with stored deflate blocks
  std::vector<std::uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
    const bool last = pos + len == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(len & 0xff));
    z.push_back(static_cast<std::uint8_t>(len >> 8));
    z.push_back(static_cast<std::uint8_t>(~len & 0xff));
    z.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
             raw.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  std::uint32_t a = 1, b = 0;
  for (std::uint8_t v : raw) {
    a = (a + v) % 65521;
    b = (b + a) % 65521;
  }
  put_u32(z, (b << 16) | a);

  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(W));
  put_u32(ihdr, static_cast<std::uint32_t>(H));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write png: " + path);
  os.write(reinterpret_cast<const char*>(png.data()),
           static_cast<std::streamsize>(png.size()));
}

}  // namespace ravg
