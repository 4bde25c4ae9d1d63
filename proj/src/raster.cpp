#include "mr/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mr {

Shape Shape::transformed(const AffineTransform& t) const {
  Shape out = *this;
  for (auto& poly : out.polygons) {
    for (auto& p : poly) p = t.apply(p);
  }
  return out;
}

void Shape::append(const Shape& other) {
  polygons.insert(polygons.end(), other.polygons.begin(), other.polygons.end());
}

std::array<double, 4> Shape::bounds() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::array<double, 4> b{inf, inf, -inf, -inf};
  for (const auto& poly : polygons) {
    for (const auto& p : poly) {
      b[0] = std::min(b[0], p.x);
      b[1] = std::min(b[1], p.y);
      b[2] = std::max(b[2], p.x);
      b[3] = std::max(b[3], p.y);
    }
  }
  return b;
}

Shape regular_polygon(Point2 center, double radius, int sides, double phase_rad) {
  std::vector<Point2> ring;
  for (int i = 0; i < sides; ++i) {
    const double a = phase_rad + 2.0 * M_PI * i / sides;
    ring.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return {{ring}};
}

Shape segment(Point2 a, Point2 b, double width) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return {};
  const double nx = -dy / len * width / 2, ny = dx / len * width / 2;
  // Extend along the segment so joints of an outline close up.
  const double ex = dx / len * width / 2, ey = dy / len * width / 2;
  return {{{{a.x - ex + nx, a.y - ey + ny},
            {b.x + ex + nx, b.y + ey + ny},
            {b.x + ex - nx, b.y + ey - ny},
            {a.x - ex - nx, a.y - ey - ny}}}};
}

Shape outline(const std::vector<Point2>& ring, double width) {
  Shape s;
  for (std::size_t i = 0; i < ring.size(); ++i) s.append(segment(ring[i], ring[(i + 1) % ring.size()], width));
  return s;
}

GrayImage rasterize(const Shape& shape, int width, int height) {
  GrayImage img(width, height);
  std::vector<double> xs;
  for (const auto& poly : shape.polygons) {
    if (poly.size() < 3) continue;
    double miny = poly[0].y, maxy = poly[0].y;
    for (const auto& p : poly) {
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const int y0 = std::max(0, static_cast<int>(std::ceil(miny)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(maxy)));
    // Even-odd scanline fill sampled at pixel centres.
    for (int y = y0; y <= y1; ++y) {
      xs.clear();
      for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2& a = poly[i];
        const Point2& b = poly[(i + 1) % poly.size()];
        if ((a.y <= y) == (b.y <= y)) continue;
        xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
        const int xa = std::max(0, static_cast<int>(std::ceil(xs[k])));
        const int xb = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1])));
        std::uint8_t* row = img.row(y);
        for (int x = xa; x <= xb; ++x) row[x] = 255;
      }
    }
  }
  return img;
}

PeriodicTile::PeriodicTile(int period_px, int oversample)
    : period_(period_px), oversample_(oversample),
      data_(static_cast<std::size_t>(period_px * oversample) * period_px * oversample, 0.0) {}

double PeriodicTile::value(double x, double y) const {
  const int n = samples();
  const double sx = x * oversample_;
  const double sy = y * oversample_;
  const double fx0 = std::floor(sx), fy0 = std::floor(sy);
  const double fx = sx - fx0, fy = sy - fy0;
  auto wrap = [n](double v) {
    long k = static_cast<long>(v) % n;
    if (k < 0) k += n;
    return static_cast<int>(k);
  };
  const int i0 = wrap(fx0), i1 = (i0 + 1) % n;
  const int j0 = wrap(fy0), j1 = (j0 + 1) % n;
  return (sample(i0, j0) * (1 - fx) + sample(i1, j0) * fx) * (1 - fy) +
         (sample(i0, j1) * (1 - fx) + sample(i1, j1) * fx) * fy;
}

GrayImage render_tile(const PeriodicTile& tile, const AffineTransform& pixel_to_tile, int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Point2 p = pixel_to_tile.apply({static_cast<double>(x), static_cast<double>(y)});
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(tile.value(p.x, p.y) + 0.5), 0.0, 255.0));
    }
  }
  return img;
}

}  // namespace mr
