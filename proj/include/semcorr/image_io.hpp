#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "semcorr/region.hpp"
#include "semcorr/tensor.hpp"

namespace semcorr {

// 8-bit interleaved raster, row-major.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;
};

namespace image_detail {

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Image8 read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P5") throw DataError(path + ": only binary PGM (P5) is supported");
  auto next_int = [&]() {
    int v = 0;
    is >> std::ws;
    while (is.peek() == '#') {
      std::string skip;
      std::getline(is, skip);
      is >> std::ws;
    }
    if (!(is >> v)) throw DataError(path + ": malformed PGM header");
    return v;
  };
  Image8 img;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
    throw DataError(path + ": unsupported PGM dimensions or depth");
  }
  is.get();
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()))) {
    throw DataError(path + ": truncated PGM data");
  }
  return img;
}

inline void write_pgm(const std::string& path, const Image8& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw DataError("write failed for " + path);
}

}  // namespace image_detail

// Reads PNG (reduced to 8-bit gray or RGB) or binary PGM, chosen by file
// extension.
inline Image8 read_image8(const std::string& path) {
  if (image_detail::has_suffix(path, ".pgm")) return image_detail::read_pgm(path);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError(path + ": " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.channels = color ? 3 : 1;
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw DataError(path + ": " + msg);
  }
  return img;
}

inline void write_image8(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw UsageError("write_image8: channels must be 1 or 3");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw ShapeError("write_image8: pixel buffer does not match dimensions");
  }
  if (image_detail::has_suffix(path, ".pgm")) {
    if (img.channels != 1) throw UsageError("PGM output must be single-channel");
    image_detail::write_pgm(path, img);
    return;
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw DataError("cannot write " + path + ": " + png.message);
  }
}

// [1, 3, H, W] floats in [0, 1]; gray input is replicated to three channels.
inline Tensor image_to_tensor(const Image8& img) {
  Tensor t({1, 3, img.height, img.width});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * img.width + x) * img.channels;
      for (int c = 0; c < 3; ++c) {
        t.at(0, c, y, x) = static_cast<float>(img.pixels[base + (img.channels == 3 ? c : 0)]) / 255.0f;
      }
    }
  }
  return t;
}

inline std::uint8_t quantize_unit(float v) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline Image8 tensor_to_image(const Tensor& t) {
  require_rank(t.shape(), 4, "image tensor");
  if (t.dim(0) != 1 || (t.dim(1) != 1 && t.dim(1) != 3)) {
    throw ShapeError("image tensor must be [1, 1|3, H, W], got " + shape_string(t.shape()));
  }
  Image8 img{t.dim(3), t.dim(2), t.dim(1), {}};
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        img.pixels[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] = quantize_unit(t.at(0, c, y, x));
      }
    }
  }
  return img;
}

inline Tensor load_image(const std::string& path) { return image_to_tensor(read_image8(path)); }

inline void save_image(const std::string& path, const Tensor& t) { write_image8(path, tensor_to_image(t)); }

// Masks: 8-bit single channel, any nonzero value is foreground.
inline ObjectMask load_mask(const std::string& path, const std::string& label = {}) {
  const Image8 img = read_image8(path);
  ObjectMask m(img.width, img.height, label, MaskSource::kFile);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      bool fg = false;
      for (int c = 0; c < img.channels; ++c) {
        fg = fg || img.pixels[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] != 0;
      }
      m.set(x, y, fg);
    }
  }
  return m;
}

inline void save_mask(const std::string& path, const ObjectMask& m) {
  Image8 img{m.width, m.height, 1, {}};
  img.pixels.resize(m.bits.size());
  for (std::size_t i = 0; i < m.bits.size(); ++i) img.pixels[i] = m.bits[i] ? 255 : 0;
  write_image8(path, img);
}

}  // namespace semcorr
