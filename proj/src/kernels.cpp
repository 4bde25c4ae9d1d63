#include "mr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mr/error.hpp"

namespace mr {

std::string to_string(RoundingDirection d) { return d == RoundingDirection::Up ? "up" : "down"; }

namespace {

AffineTransform checked_inverse(const AffineTransform& t) {
  auto inv = t.inverse();
  if (!inv) throw Error(ErrorCode::SingularTransform, "transform is not invertible");
  return *inv;
}

void check_warp_args(int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) {
    throw Error(ErrorCode::EmptyImage, "warp output dimensions must be positive");
  }
}

void check_same_shape(const GrayImage& a, const GrayImage& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                    std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

void check_threshold(int threshold) {
  if (threshold < 1 || threshold > 255) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in 1..255");
  }
}

inline double sample_bilinear(const GrayImage& src, double sx, double sy) {
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  // Entirely outside the one-pixel apron: nothing contributes.
  if (fx0 < -1.0 || fy0 < -1.0 || fx0 >= src.width() || fy0 >= src.height()) return 0.0;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  auto px = [&](int x, int y) -> double { return src.contains(x, y) ? src.at(x, y) : 0.0; };
  const double top = px(x0, y0) * (1.0 - fx) + (fx > 0.0 ? px(x0 + 1, y0) * fx : 0.0);
  if (fy <= 0.0) return top;
  const double bot = px(x0, y0 + 1) * (1.0 - fx) + (fx > 0.0 ? px(x0 + 1, y0 + 1) * fx : 0.0);
  return top * (1.0 - fy) + bot * fy;
}

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

inline void warp_row(const GrayImage& src, const AffineTransform& inv, int y, std::uint8_t* out,
                     int out_w) {
  for (int x = 0; x < out_w; ++x) {
    const double sx = inv.a * x + inv.b * y + inv.tx;
    const double sy = inv.c * x + inv.d * y + inv.ty;
    out[x] = to_u8(sample_bilinear(src, sx, sy));
  }
}

inline std::uint8_t combine_px(int a, int b, int threshold, RoundingDirection dir) {
  const int s = std::min(255, a + b);
  if (dir == RoundingDirection::Up) return s >= threshold ? 255 : 0;
  return s <= 255 - threshold ? 0 : 255;
}

}  // namespace

namespace serial {

GrayImage warp_affine(const GrayImage& src, const AffineTransform& t, int out_w, int out_h) {
  check_warp_args(out_w, out_h);
  const AffineTransform inv = checked_inverse(t);
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) warp_row(src, inv, y, out.row(y), out_w);
  return out;
}

GrayImage combine_threshold(const GrayImage& accum, const GrayImage& addend, int threshold,
                            RoundingDirection dir) {
  check_same_shape(accum, addend);
  check_threshold(threshold);
  GrayImage out(accum.width(), accum.height());
  const auto a = accum.pixels();
  const auto b = addend.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = combine_px(a[i], b[i], threshold, dir);
  return out;
}

double mse(const GrayImage& a, const GrayImage& b) {
  check_same_shape(a, b);
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(pa.size());
}

}  // namespace serial

GrayImage warp_affine(const GrayImage& src, const AffineTransform& t, int out_w, int out_h) {
  check_warp_args(out_w, out_h);
  const AffineTransform inv = checked_inverse(t);
  GrayImage out(out_w, out_h);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out_h; ++y) warp_row(src, inv, y, out.row(y), out_w);
  return out;
}

GrayImage combine_threshold(const GrayImage& accum, const GrayImage& addend, int threshold,
                            RoundingDirection dir) {
  check_same_shape(accum, addend);
  check_threshold(threshold);
  GrayImage out(accum.width(), accum.height());
  const std::uint8_t* a = accum.pixels().data();
  const std::uint8_t* b = addend.pixels().data();
  std::uint8_t* o = out.pixels().data();
  const long n = static_cast<long>(out.size());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) o[i] = combine_px(a[i], b[i], threshold, dir);
  return out;
}

double mse(const GrayImage& a, const GrayImage& b) {
  check_same_shape(a, b);
  const std::uint8_t* pa = a.pixels().data();
  const std::uint8_t* pb = b.pixels().data();
  const long n = static_cast<long>(a.size());
  // Integer accumulation keeps the result independent of the reduction order.
  long long sum = 0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
  for (long i = 0; i < n; ++i) {
    const int d = static_cast<int>(pa[i]) - static_cast<int>(pb[i]);
    sum += d * d;
  }
  return static_cast<double>(sum) / static_cast<double>(n);
}

}  // namespace mr
