#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lmix/error.hpp"

namespace lmix {

/// 8-bit interleaved image, row-major. channels is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  bool empty() const { return width <= 0 || height <= 0; }
  const uint8_t* row(int y) const { return pixels.data() + size_t(y) * width * channels; }
  uint8_t* row(int y) { return pixels.data() + size_t(y) * width * channels; }
};

/// Row-major float grid; carrier for density and saliency maps.
struct FloatMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  bool empty() const { return width <= 0 || height <= 0; }
  float at(int x, int y) const { return values[size_t(y) * width + x]; }
  float& at(int x, int y) { return values[size_t(y) * width + x]; }
};

namespace detail {

struct PngFile {
  std::FILE* f = nullptr;
  explicit PngFile(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
  ~PngFile() {
    if (f) std::fclose(f);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

}  // namespace detail

/// Decodes any libpng-readable file to 8-bit gray or RGB.
inline Image read_png(const std::string& path, int want_channels = 3) {
  if (want_channels != 1 && want_channels != 3) {
    throw ValidationError("read_png: want_channels must be 1 or 3");
  }
  detail::PngFile file(path, "rb");
  if (!file.f) throw IoError("cannot open PNG: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG: " + path);
  }
  png_init_io(png, file.f);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (want_channels == 3 &&
      (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) {
    png_set_gray_to_rgb(png);
  }
  if (want_channels == 1 &&
      (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
       color == PNG_COLOR_TYPE_PALETTE)) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = want_channels;
  img.pixels.assign(size_t(img.width) * img.height * want_channels, 0);
  if (static_cast<int>(png_get_rowbytes(png, info)) != img.width * want_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unexpected PNG row size: " + path);
  }
  row_ptrs.resize(img.height);
  for (int y = 0; y < img.height; ++y) row_ptrs[y] = img.row(y);
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

/// Writes 8-bit gray or RGB. Fixed settings so output bytes are reproducible.
inline void write_png(const Image& img, const std::string& path) {
  if (img.empty() || (img.channels != 1 && img.channels != 3)) {
    throw ValidationError("write_png: image must be non-empty gray or RGB");
  }
  detail::PngFile file(path, "wb");
  if (!file.f) throw IoError("cannot open for write: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG: " + path);
  }
  png_init_io(png, file.f);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.row(y)));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

// DMAP: one-line text header "DMAP <width> <height>\n" followed by
// width*height little-endian float32 values, row-major.

inline void write_dmap(const FloatMap& map, const std::string& path) {
  if (map.empty()) throw ValidationError("write_dmap: empty map");
  detail::PngFile file(path, "wb");
  if (!file.f) throw IoError("cannot open for write: " + path);
  const std::string header =
      "DMAP " + std::to_string(map.width) + " " + std::to_string(map.height) + "\n";
  if (std::fwrite(header.data(), 1, header.size(), file.f) != header.size()) {
    throw IoError("short write: " + path);
  }
  std::vector<uint8_t> buf(map.values.size() * 4);
  for (size_t i = 0; i < map.values.size(); ++i) {
    uint32_t bits;
    std::memcpy(&bits, &map.values[i], 4);
    buf[4 * i + 0] = uint8_t(bits & 0xFF);
    buf[4 * i + 1] = uint8_t((bits >> 8) & 0xFF);
    buf[4 * i + 2] = uint8_t((bits >> 16) & 0xFF);
    buf[4 * i + 3] = uint8_t((bits >> 24) & 0xFF);
  }
  if (std::fwrite(buf.data(), 1, buf.size(), file.f) != buf.size()) {
    throw IoError("short write: " + path);
  }
}

inline FloatMap read_dmap(const std::string& path) {
  detail::PngFile file(path, "rb");
  if (!file.f) throw IoError("cannot open: " + path);
  char magic[5] = {};
  if (std::fread(magic, 1, 5, file.f) != 5 || std::memcmp(magic, "DMAP ", 5) != 0) {
    throw ValidationError("not a DMAP file: " + path);
  }
  std::string header;
  int ch;
  while ((ch = std::fgetc(file.f)) != EOF && ch != '\n') header.push_back(char(ch));
  int w = 0, h = 0;
  if (std::sscanf(header.c_str(), "%d %d", &w, &h) != 2 || w <= 0 || h <= 0) {
    throw ValidationError("bad DMAP header: " + path);
  }
  FloatMap map;
  map.width = w;
  map.height = h;
  map.values.resize(size_t(w) * h);
  std::vector<uint8_t> buf(map.values.size() * 4);
  if (std::fread(buf.data(), 1, buf.size(), file.f) != buf.size()) {
    throw IoError("truncated DMAP payload: " + path);
  }
  for (size_t i = 0; i < map.values.size(); ++i) {
    const uint32_t bits = uint32_t(buf[4 * i]) | (uint32_t(buf[4 * i + 1]) << 8) |
                          (uint32_t(buf[4 * i + 2]) << 16) |
                          (uint32_t(buf[4 * i + 3]) << 24);
    std::memcpy(&map.values[i], &bits, 4);
  }
  return map;
}

/// Reads a float map from either accepted format: 8-bit grayscale PNG
/// (value/255) or raw DMAP. Dispatch by file magic.
inline FloatMap read_float_map(const std::string& path) {
  detail::PngFile probe(path, "rb");
  if (!probe.f) throw IoError("cannot open: " + path);
  uint8_t magic[4] = {};
  const size_t got = std::fread(magic, 1, 4, probe.f);
  if (got >= 4 && magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
    const Image gray = read_png(path, 1);
    FloatMap map;
    map.width = gray.width;
    map.height = gray.height;
    map.values.resize(size_t(gray.width) * gray.height);
    for (size_t i = 0; i < map.values.size(); ++i) {
      map.values[i] = gray.pixels[i] / 255.0f;
    }
    return map;
  }
  if (got >= 4 && std::memcmp(magic, "DMAP", 4) == 0) return read_dmap(path);
  throw ValidationError("unrecognized map format (expected PNG or DMAP): " + path);
}

/// Per-pixel luminance in [0,1].
inline FloatMap luminance(const Image& img) {
  if (img.empty()) throw ValidationError("luminance: empty image");
  FloatMap out;
  out.width = img.width;
  out.height = img.height;
  out.values.resize(size_t(img.width) * img.height);
  if (img.channels == 1) {
    for (size_t i = 0; i < out.values.size(); ++i) out.values[i] = img.pixels[i] / 255.0f;
  } else {
    for (size_t i = 0; i < out.values.size(); ++i) {
      const uint8_t* p = img.pixels.data() + 3 * i;
      out.values[i] = (0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2]) / 255.0f;
    }
  }
  return out;
}

inline Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (img.empty()) throw ValidationError("resize_bilinear: empty image");
  if (out_w <= 0 || out_h <= 0) throw ValidationError("resize_bilinear: bad target size");
  if (img.width == out_w && img.height == out_h) return img;
  Image out;
  out.width = out_w;
  out.height = out_h;
  out.channels = img.channels;
  out.pixels.resize(size_t(out_w) * out_h * img.channels);
  const double sx = double(img.width) / out_w;
  const double sy = double(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(int(std::floor(fy)), 0, img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(int(std::floor(fx)), 0, img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = std::clamp(fx - x0, 0.0, 1.0);
      for (int c = 0; c < img.channels; ++c) {
        const double v00 = img.row(y0)[x0 * img.channels + c];
        const double v01 = img.row(y0)[x1 * img.channels + c];
        const double v10 = img.row(y1)[x0 * img.channels + c];
        const double v11 = img.row(y1)[x1 * img.channels + c];
        const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                         ty * ((1 - tx) * v10 + tx * v11);
        out.row(y)[x * img.channels + c] = uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

inline FloatMap resize_bilinear(const FloatMap& map, int out_w, int out_h) {
  if (map.empty()) throw ValidationError("resize_bilinear: empty map");
  if (out_w <= 0 || out_h <= 0) throw ValidationError("resize_bilinear: bad target size");
  if (map.width == out_w && map.height == out_h) return map;
  FloatMap out;
  out.width = out_w;
  out.height = out_h;
  out.values.resize(size_t(out_w) * out_h);
  const double sx = double(map.width) / out_w;
  const double sy = double(map.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::clamp(int(std::floor(fy)), 0, map.height - 1);
    const int y1 = std::min(y0 + 1, map.height - 1);
    const double ty = std::clamp(fy - y0, 0.0, 1.0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = std::clamp(int(std::floor(fx)), 0, map.width - 1);
      const int x1 = std::min(x0 + 1, map.width - 1);
      const double tx = std::clamp(fx - x0, 0.0, 1.0);
      const double v = (1 - ty) * ((1 - tx) * map.at(x0, y0) + tx * map.at(x1, y0)) +
                       ty * ((1 - tx) * map.at(x0, y1) + tx * map.at(x1, y1));
      out.at(x, y) = float(v);
    }
  }
  return out;
}

}  // namespace lmix
