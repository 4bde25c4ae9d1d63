#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mr {

/// 8-bit single-channel raster, row-major. Ink-positive: background is 0 and
/// drawn content carries high intensities.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }
  const std::uint8_t* row(int y) const { return data_.data() + index(0, y); }
  std::uint8_t* row(int y) { return data_.data() + index(0, y); }

  bool same_shape(const GrayImage& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  double center_x() const noexcept { return x + 0.5 * (w - 1); }
  double center_y() const noexcept { return y + 0.5 * (h - 1); }

  bool fits_in(const GrayImage& img) const noexcept {
    return x >= 0 && y >= 0 && w > 0 && h > 0 && right() <= img.width() &&
           bottom() <= img.height();
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Shrinks a rectangle by `by` pixels on every side.
Rect inset(const Rect& r, int by);

/// Exact pixel copy of `r`. Throws OutOfBounds when `r` leaves the image.
GrayImage crop(const GrayImage& img, const Rect& r);

/// Writes `src` into `dst` with its top-left corner at (x, y); clipped.
void paste(GrayImage& dst, const GrayImage& src, int x, int y);

GrayImage invert(const GrayImage& img);
GrayImage flip_horizontal(const GrayImage& img);

/// Decodes an 8-bit grayscale or RGB(A) PNG. Colour is reduced to BT.601 luma
/// and the result is inverted when the mean border intensity exceeds 127 so
/// that the ink-positive convention holds. Throws IoError when the file
/// cannot be opened and DecodeError when it is not a readable PNG.
GrayImage load_png(const std::filesystem::path& path);

/// Writes an 8-bit grayscale, non-interlaced PNG. Output bytes depend only on
/// the pixels.
void save_png(const GrayImage& img, const std::filesystem::path& path);

/// Same as save_png but accepts an arbitrary RGB/gray raster; used by tests to
/// produce colour inputs.
void save_png_raw(const std::filesystem::path& path, int width, int height, int channels,
                  std::span<const std::uint8_t> data);

}  // namespace mr
