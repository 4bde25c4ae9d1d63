#include "mr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>

#include "mr/error.hpp"

namespace mr {

GrayImage::GrayImage(int width, int height, std::uint8_t fill) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::EmptyImage, "image dimensions must be positive");
  }
  width_ = width;
  height_ = height;
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::EmptyImage, "image dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::DimensionMismatch, "pixel buffer does not match dimensions");
  }
  width_ = width;
  height_ = height;
  data_ = std::move(data);
}

Rect inset(const Rect& r, int by) { return {r.x + by, r.y + by, r.w - 2 * by, r.h - 2 * by}; }

GrayImage crop(const GrayImage& img, const Rect& r) {
  if (!r.fits_in(img)) {
    throw Error(ErrorCode::OutOfBounds,
                "crop region (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                    std::to_string(r.w) + "," + std::to_string(r.h) + ") exceeds " +
                    std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
  GrayImage out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    std::copy_n(img.row(r.y + y) + r.x, r.w, out.row(y));
  }
  return out;
}

void paste(GrayImage& dst, const GrayImage& src, int x, int y) {
  for (int sy = 0; sy < src.height(); ++sy) {
    const int dy = y + sy;
    if (dy < 0 || dy >= dst.height()) continue;
    for (int sx = 0; sx < src.width(); ++sx) {
      const int dx = x + sx;
      if (dx < 0 || dx >= dst.width()) continue;
      dst.at(dx, dy) = src.at(sx, sy);
    }
  }
}

GrayImage invert(const GrayImage& img) {
  GrayImage out = img;
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    std::reverse_copy(img.row(y), img.row(y) + img.width(), out.row(y));
  }
  return out;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::DecodeError, std::string("png: ") + msg);
}

void png_warning_handler(png_structp, png_const_charp) {}

double border_mean(const GrayImage& img) {
  double sum = 0.0;
  std::size_t n = 0;
  const int w = img.width();
  const int h = img.height();
  for (int x = 0; x < w; ++x) {
    sum += img.at(x, 0);
    ++n;
    if (h > 1) {
      sum += img.at(x, h - 1);
      ++n;
    }
  }
  for (int y = 1; y + 1 < h; ++y) {
    sum += img.at(0, y);
    ++n;
    if (w > 1) {
      sum += img.at(w - 1, y);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

GrayImage load_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorCode::DecodeError, "not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  if (!png) throw Error(ErrorCode::DecodeError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw Error(ErrorCode::DecodeError, "png_create_info_struct failed");

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  if (width == 0 || height == 0) throw Error(ErrorCode::EmptyImage, "PNG has zero dimension");

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  GrayImage img(static_cast<int>(width), static_cast<int>(height));
  for (png_uint_32 y = 0; y < height; ++y) {
    const png_byte* src = rows[y];
    for (png_uint_32 x = 0; x < width; ++x) {
      const png_byte* px = src + static_cast<std::size_t>(x) * channels;
      std::uint8_t v = 0;
      if (channels <= 2) {
        v = px[0];
      } else {
        // ITU-R BT.601 luma
        const double l = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        v = static_cast<std::uint8_t>(std::clamp(std::lround(l), 0L, 255L));
      }
      img.at(static_cast<int>(x), static_cast<int>(y)) = v;
    }
  }

  if (border_mean(img) > 127.0) img = invert(img);
  return img;
}

void save_png_raw(const std::filesystem::path& path, int width, int height, int channels,
                  std::span<const std::uint8_t> data) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::EmptyImage, "cannot save empty image");
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};

  const int color_type = channels == 1   ? PNG_COLOR_TYPE_GRAY
                         : channels == 3 ? PNG_COLOR_TYPE_RGB
                                         : PNG_COLOR_TYPE_RGB_ALPHA;
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data.data() + stride * y));
  }
  png_write_end(png, nullptr);
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
  save_png_raw(path, img.width(), img.height(), 1, img.pixels());
}

}  // namespace mr
