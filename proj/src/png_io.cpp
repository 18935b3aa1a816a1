#include "sfd/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace sfd {

namespace {

const std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void write_chunk(std::vector<std::uint8_t>& out, const char type[4],
                 const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc =
      crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_gray(const std::string& path, const Tensor& image) {
  if (image.rank() != 2) throw std::invalid_argument("write_png_gray: image must be [H,W]");
  const std::size_t H = image.dim(0), W = image.dim(1);

  // Filter type 0 on every row.
  std::vector<std::uint8_t> raw;
  raw.reserve(H * (W + 1));
  for (std::size_t y = 0; y < H; ++y) {
    raw.push_back(0);
    for (std::size_t x = 0; x < W; ++x) {
      double v = image.at(y, x);
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      raw.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  }
  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) !=
      Z_OK) {
    throw std::runtime_error("write_png_gray: zlib compression failed");
  }
  comp.resize(comp_size);

  std::vector<std::uint8_t> out(kSig, kSig + 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(W));
  put_u32(ihdr, static_cast<std::uint32_t>(H));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // non-interlaced
  write_chunk(out, "IHDR", ihdr);
  write_chunk(out, "IDAT", comp);
  write_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_png_gray: cannot open '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write_png_gray: write failed for '" + path + "'");
}

void write_png_mask(const std::string& path, const Tensor& mask) {
  Tensor img = mask;
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = img[i] >= 0.5 ? 1.0 : 0.0;
  write_png_gray(path, img);
}

Tensor read_png_gray(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_png_gray: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSig, 8) != 0) {
    throw std::runtime_error("read_png_gray: '" + path + "' is not a PNG file");
  }

  std::size_t W = 0, H = 0;
  std::vector<std::uint8_t> idat;
  std::size_t pos = 8;
  bool seen_ihdr = false;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) {
      throw std::runtime_error("read_png_gray: truncated chunk in '" + path + "'");
    }
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw std::runtime_error("read_png_gray: bad IHDR");
      W = get_u32(data);
      H = get_u32(data + 4);
      if (data[8] != 8 || data[9] != 0) {
        throw std::runtime_error("read_png_gray: only 8-bit grayscale is supported");
      }
      if (data[12] != 0) {
        throw std::runtime_error("read_png_gray: interlaced PNG is not supported");
      }
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || W == 0 || H == 0) {
    throw std::runtime_error("read_png_gray: missing IHDR in '" + path + "'");
  }

  std::vector<std::uint8_t> raw(H * (W + 1));
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) !=
          Z_OK ||
      raw_size != raw.size()) {
    throw std::runtime_error("read_png_gray: corrupt image data in '" + path + "'");
  }

  // Undo per-row filtering (bpp = 1).
  Tensor img({H, W});
  std::vector<std::uint8_t> prev(W, 0), cur(W, 0);
  for (std::size_t y = 0; y < H; ++y) {
    const std::uint8_t filter = raw[y * (W + 1)];
    const std::uint8_t* src = raw.data() + y * (W + 1) + 1;
    for (std::size_t x = 0; x < W; ++x) {
      const int a = x > 0 ? cur[x - 1] : 0;
      const int b = prev[x];
      const int c = x > 0 ? prev[x - 1] : 0;
      int v = src[x];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default:
          throw std::runtime_error("read_png_gray: unknown filter type");
      }
      cur[x] = static_cast<std::uint8_t>(v & 0xff);
      img.at(y, x) = cur[x] / 255.0;
    }
    prev = cur;
  }
  return img;
}

}  // namespace sfd
