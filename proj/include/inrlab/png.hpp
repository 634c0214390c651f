#pragma once

// 8-bit RGB PNG I/O via libpng. Values in [0,1] quantize with round-half-up.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/errors.hpp"

namespace inrlab {

inline std::uint8_t quantize_unit(double v) {
  const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

/// Writes an (h*w) x c matrix (row-major pixels, c = 1 or 3) as an RGB PNG;
/// a single channel is replicated to grey.
inline void write_png(const std::string& path, const Matrix& pixels, std::size_t h, std::size_t w) {
  if (static_cast<std::size_t>(pixels.rows()) != h * w || (pixels.cols() != 1 && pixels.cols() != 3)) {
    throw ConfigError("write_png: expected (h*w) x 1 or (h*w) x 3 pixels");
  }
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: out of memory");
  }
  std::vector<std::uint8_t> row(w * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: failed writing '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto i = static_cast<Eigen::Index>(r * w + c);
      for (std::size_t k = 0; k < 3; ++k) {
        row[c * 3 + k] = quantize_unit(pixels(i, pixels.cols() == 1 ? 0 : static_cast<Eigen::Index>(k)));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngImage {
  std::size_t height = 0;
  std::size_t width = 0;
  Matrix pixels;  // (h*w) x 3 in [0,1]
};

/// Reads any PNG and converts it to 8-bit RGB scaled to [0,1].
inline PngImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot read '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: out of memory");
  }
  PngImage img;
  std::vector<std::uint8_t> buf;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: '" + path + "' is not a readable PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buf.resize(stride * img.height);
  rows.resize(img.height);
  for (std::size_t r = 0; r < img.height; ++r) rows[r] = buf.data() + r * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  img.pixels.resize(static_cast<Eigen::Index>(img.height * img.width), 3);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      for (std::size_t k = 0; k < 3; ++k) {
        img.pixels(static_cast<Eigen::Index>(r * img.width + c), static_cast<Eigen::Index>(k)) =
            static_cast<double>(buf[r * stride + c * 3 + k]) / 255.0;
      }
    }
  }
  return img;
}

}  // namespace inrlab
