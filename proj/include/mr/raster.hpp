#pragma once

#include <array>
#include <vector>

#include "mr/affine.hpp"
#include "mr/image.hpp"

namespace mr {

/// A union of filled simple polygons in continuous pixel coordinates, where
/// pixel (x, y) is centred on the point (x, y).
struct Shape {
  std::vector<std::vector<Point2>> polygons;

  Shape transformed(const AffineTransform& t) const;
  void append(const Shape& other);
  /// Axis-aligned bounds over all vertices: {minx, miny, maxx, maxy}.
  std::array<double, 4> bounds() const;
};

Shape regular_polygon(Point2 center, double radius, int sides, double phase_rad);
/// Thick line segment as a quad.
Shape segment(Point2 a, Point2 b, double width);
/// Closed polyline outline of the given stroke width.
Shape outline(const std::vector<Point2>& ring, double width);

/// Point-sampled binary rasterization: 255 inside any polygon, 0 outside.
GrayImage rasterize(const Shape& shape, int width, int height);

/// Doubly periodic intensity field stored at `oversample` samples per pixel
/// and read back with periodic bilinear interpolation.
class PeriodicTile {
 public:
  PeriodicTile(int period_px, int oversample);

  int period() const noexcept { return period_; }
  int oversample() const noexcept { return oversample_; }
  int samples() const noexcept { return period_ * oversample_; }
  /// Sample (i, j) sits at continuous coordinate (i / oversample, j / oversample).
  double& sample(int i, int j) { return data_[static_cast<std::size_t>(j) * samples() + i]; }
  double sample(int i, int j) const { return data_[static_cast<std::size_t>(j) * samples() + i]; }

  double value(double x, double y) const;

 private:
  int period_;
  int oversample_;
  std::vector<double> data_;
};

/// Renders a w x h panel whose pixel p takes tile value at `pixel_to_tile(p)`.
GrayImage render_tile(const PeriodicTile& tile, const AffineTransform& pixel_to_tile, int w, int h);

}  // namespace mr
