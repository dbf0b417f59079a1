#include "anydoor/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace anydoor::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3 after normalisation
  std::vector<std::uint8_t> pixels;
};

Raster read_png(const std::filesystem::path& path, bool want_gray) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open '" + path.string() + "'");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  Raster r;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool is_gray = color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want_gray && !is_gray) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (!want_gray && is_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.channels = png_get_channels(png, info);
  r.pixels.resize(static_cast<size_t>(r.width) * r.height * r.channels);
  rows.resize(r.height);
  for (int y = 0; y < r.height; ++y) {
    rows[y] = r.pixels.data() + static_cast<size_t>(y) * r.width * r.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

void write_png(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& pixels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

ImageBuffer quantized(const ImageBuffer& img) {
  ImageBuffer out = img;
  for (int c = 0; c < out.channels(); ++c) {
    out.plane(c) = out.plane(c).unaryExpr([](double v) { return quantize(v) / 255.0; });
  }
  return out;
}

ImageBuffer read_rgb(const std::filesystem::path& path) {
  const Raster r = read_png(path, false);
  ImageBuffer img(r.width, r.height, 3);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img(c, y, x) = r.pixels[(static_cast<size_t>(y) * r.width + x) * 3 + c] / 255.0;
      }
    }
  }
  return img;
}

Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> read_labels(const std::filesystem::path& path) {
  const Raster r = read_png(path, true);
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> labels(r.height, r.width);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      labels(y, x) = r.pixels[static_cast<size_t>(y) * r.width + x];
    }
  }
  return labels;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const auto labels = read_labels(path);
  BinaryMask mask(static_cast<int>(labels.cols()), static_cast<int>(labels.rows()));
  mask.data() = (labels != 0).cast<std::uint8_t>();
  return mask;
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img) {
  std::vector<std::uint8_t> px(static_cast<size_t>(img.width()) * img.height() * img.channels());
  size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) px[i++] = quantize(img(c, y, x));
    }
  }
  write_png(path, img.width(), img.height(), img.channels(), px);
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> px(static_cast<size_t>(mask.width()) * mask.height());
  size_t i = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) px[i++] = mask(y, x) ? 255 : 0;
  }
  write_png(path, mask.width(), mask.height(), 1, px);
}

void write_labels(const std::filesystem::path& path,
                  const Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>& labels) {
  if (labels.size() == 0) throw InvalidArgument("empty label map");
  if (labels.minCoeff() < 0 || labels.maxCoeff() > 255) {
    throw InvalidArgument("label values must be in [0, 255]");
  }
  const int w = static_cast<int>(labels.cols()), h = static_cast<int>(labels.rows());
  std::vector<std::uint8_t> px(static_cast<size_t>(w) * h);
  size_t i = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) px[i++] = static_cast<std::uint8_t>(labels(y, x));
  }
  write_png(path, w, h, 1, px);
}

}  // namespace anydoor::io
