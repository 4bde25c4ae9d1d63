#include "mr/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "mr/error.hpp"

namespace mr {

Modality modality_of(Condition c) {
  return c == Condition::SymbolicMatching || c == Condition::SymbolicReasoning
             ? Modality::Symbolic
             : Modality::Perceptual;
}

bool is_reasoning(Condition c) {
  return c == Condition::SymbolicReasoning || c == Condition::PerceptualReasoning;
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::SymbolicMatching: return "SymbolicMatching";
    case Condition::SymbolicReasoning: return "SymbolicReasoning";
    case Condition::PerceptualMatching: return "PerceptualMatching";
    case Condition::PerceptualReasoning: return "PerceptualReasoning";
  }
  return "SymbolicMatching";
}

std::string to_string(Modality m) { return m == Modality::Symbolic ? "Symbolic" : "Perceptual"; }

Condition condition_from_string(const std::string& s) {
  for (Condition c : kAllConditions) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown condition '" + s + "'");
}

Rect target_window(const TrialLayout& layout) {
  const Rect& b = layout.windows[1];
  const Rect& c = layout.windows[2];
  return {c.x + (c.x - b.x), c.y + (c.y - b.y), c.w, c.h};
}

Rect blank_in_target(const TrialLayout& layout) {
  const Rect t = target_window(layout);
  const Rect inner = inset(layout.blank, 1);
  return {inner.x - t.x, inner.y - t.y, inner.w, inner.h};
}

namespace {

// Eight neighbours, clockwise on screen (y grows downward), starting east.
constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

int direction_of(int dx, int dy) {
  for (int k = 0; k < 8; ++k) {
    if (kDx[k] == dx && kDy[k] == dy) return k;
  }
  return 0;
}

// Suzuki & Abe (1985) border following on a zero-padded label grid. Returns
// outer borders only, as pixel-centre rings in image coordinates.
std::vector<std::vector<Point2>> trace_outer_borders(const GrayImage& img, int threshold) {
  const int w = img.width() + 2;
  const int h = img.height() + 2;
  std::vector<int> f(static_cast<std::size_t>(w) * h, 0);
  auto at = [&](int x, int y) -> int& { return f[static_cast<std::size_t>(y) * w + x]; };
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) at(x + 1, y + 1) = img.at(x, y) >= threshold ? 1 : 0;
  }

  std::vector<std::vector<Point2>> borders;
  int nbd = 1;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const int v = at(x, y);
      if (v == 0) continue;
      bool outer = false;
      int sx = 0, sy = 0;  // neighbour the search starts from
      if (v == 1 && at(x - 1, y) == 0) {
        outer = true;
        sx = x - 1;
        sy = y;
      } else if (v >= 1 && at(x + 1, y) == 0) {
        sx = x + 1;
        sy = y;
      } else {
        continue;
      }
      ++nbd;

      std::vector<Point2> ring;
      // 3.1: clockwise from the start neighbour for any non-zero pixel.
      const int start_dir = direction_of(sx - x, sy - y);
      int found = -1;
      for (int k = 0; k < 8; ++k) {
        const int d = (start_dir + k) % 8;
        if (at(x + kDx[d], y + kDy[d]) != 0) {
          found = d;
          break;
        }
      }
      if (found < 0) {
        at(x, y) = -nbd;
        if (outer) borders.push_back({{static_cast<double>(x - 1), static_cast<double>(y - 1)}});
        continue;
      }
      const int x1 = x + kDx[found], y1 = y + kDy[found];
      int x2 = x1, y2 = y1;
      int x3 = x, y3 = y;
      while (true) {
        if (outer) ring.push_back({static_cast<double>(x3 - 1), static_cast<double>(y3 - 1)});
        // 3.3: counter-clockwise around (x3, y3), starting after (x2, y2).
        const int from = direction_of(x2 - x3, y2 - y3);
        bool east_zero = false;
        int x4 = x3, y4 = y3;
        for (int k = 1; k <= 8; ++k) {
          const int d = (from - k + 16) % 8;
          const int nx = x3 + kDx[d], ny = y3 + kDy[d];
          if (at(nx, ny) != 0) {
            x4 = nx;
            y4 = ny;
            break;
          }
          if (d == 0) east_zero = true;
        }
        // 3.4
        if (east_zero) {
          at(x3, y3) = -nbd;
        } else if (at(x3, y3) == 1) {
          at(x3, y3) = nbd;
        }
        // 3.5
        if (x4 == x && y4 == y && x3 == x1 && y3 == y1) break;
        x2 = x3;
        y2 = y3;
        x3 = x4;
        y3 = y4;
      }
      if (outer) {
        // The loop records (x, y) first and then revisits it before closing.
        if (ring.size() > 1 && ring.back().x == ring.front().x && ring.back().y == ring.front().y) {
          ring.pop_back();
        }
        borders.push_back(std::move(ring));
      }
    }
  }
  return borders;
}

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  const double t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

// Open-polyline Douglas-Peucker over pts[first..last], marking kept indices.
void dp_mark(const std::vector<Point2>& pts, std::size_t first, std::size_t last, double tol,
             std::vector<char>& keep) {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    if (hi <= lo + 1) continue;
    double best = -1.0;
    std::size_t idx = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = point_segment_distance(pts[i], pts[lo], pts[hi]);
      if (d > best) {
        best = d;
        idx = i;
      }
    }
    if (best > tol) {
      keep[idx] = 1;
      stack.push_back({lo, idx});
      stack.push_back({idx, hi});
    }
  }
}

}  // namespace

std::vector<Point2> simplify_closed(const std::vector<Point2>& ring, double tolerance) {
  if (ring.size() < 3) return ring;
  // Split the ring at its first point and the point farthest from it.
  std::size_t far = 0;
  double best = -1.0;
  for (std::size_t i = 1; i < ring.size(); ++i) {
    const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  std::vector<Point2> closed = ring;
  closed.push_back(ring[0]);
  std::vector<char> keep(closed.size(), 0);
  keep[0] = 1;
  keep[far] = 1;
  dp_mark(closed, 0, far, tolerance, keep);
  dp_mark(closed, far, closed.size() - 1, tolerance, keep);
  std::vector<Point2> out;
  for (std::size_t i = 0; i + 1 < closed.size(); ++i) {
    if (keep[i]) out.push_back(closed[i]);
  }
  return out;
}

std::vector<Polygon> find_contours(const GrayImage& img, int binarize_threshold) {
  std::vector<Polygon> out;
  for (const auto& ring : trace_outer_borders(img, binarize_threshold)) {
    auto verts = simplify_closed(ring, kSimplifyTolerancePx);
    if (verts.size() >= 3) out.push_back({std::move(verts)});
  }
  return out;
}

std::vector<Rect> detect_rectangles(const std::vector<Polygon>& polys) {
  std::vector<Rect> out;
  for (const auto& poly : polys) {
    const auto& v = poly.vertices;
    if (v.size() != 4) continue;
    bool square_corners = true;
    for (std::size_t i = 0; i < 4 && square_corners; ++i) {
      const Point2& p = v[i];
      const Point2& prev = v[(i + 3) % 4];
      const Point2& next = v[(i + 1) % 4];
      const double ux = prev.x - p.x, uy = prev.y - p.y;
      const double wx = next.x - p.x, wy = next.y - p.y;
      const double nu = std::hypot(ux, uy), nw = std::hypot(wx, wy);
      if (nu == 0.0 || nw == 0.0) {
        square_corners = false;
        break;
      }
      const double cosang = std::clamp((ux * wx + uy * wy) / (nu * nw), -1.0, 1.0);
      const double deg = std::acos(cosang) * 180.0 / M_PI;
      square_corners = std::abs(deg - 90.0) <= 10.0;
    }
    if (!square_corners) continue;

    double minx = v[0].x, maxx = v[0].x, miny = v[0].y, maxy = v[0].y;
    double area2 = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      minx = std::min(minx, v[i].x);
      maxx = std::max(maxx, v[i].x);
      miny = std::min(miny, v[i].y);
      maxy = std::max(maxy, v[i].y);
      const Point2& q = v[(i + 1) % 4];
      area2 += v[i].x * q.y - q.x * v[i].y;
    }
    const double box = (maxx - minx) * (maxy - miny);
    if (box <= 0.0 || 0.5 * std::abs(area2) < 0.95 * box) continue;

    Rect r{static_cast<int>(std::lround(minx)), static_cast<int>(std::lround(miny)),
           static_cast<int>(std::lround(maxx - minx)) + 1,
           static_cast<int>(std::lround(maxy - miny)) + 1};
    if (r.w < 10 || r.h < 10) continue;
    out.push_back(r);
  }
  return out;
}

namespace {

constexpr int kMinSliceWidth = 32;

bool dims_match(const Rect& a, const Rect& b, int tol = 2) {
  return std::abs(a.w - b.w) <= tol && std::abs(a.h - b.h) <= tol;
}

bool horizontally_disjoint(const Rect& a, const Rect& b) {
  return a.right() <= b.x || b.right() <= a.x;
}

}  // namespace

TrialLayout identify_layout(const GrayImage& screen) {
  const auto rects = detect_rectangles(find_contours(screen, kContourThreshold));

  // Choices: the bottom-most pair of equal, side-by-side rectangles.
  std::vector<Rect> by_bottom = rects;
  std::stable_sort(by_bottom.begin(), by_bottom.end(),
                   [](const Rect& a, const Rect& b) { return a.bottom() > b.bottom(); });
  bool have_choices = false;
  std::array<Rect, 2> choices{};
  for (std::size_t i = 0; i < by_bottom.size() && !have_choices; ++i) {
    for (std::size_t j = i + 1; j < by_bottom.size(); ++j) {
      const Rect& a = by_bottom[i];
      const Rect& b = by_bottom[j];
      if (std::abs(a.bottom() - b.bottom()) <= 2 && dims_match(a, b) && horizontally_disjoint(a, b)) {
        choices = a.x < b.x ? std::array<Rect, 2>{a, b} : std::array<Rect, 2>{b, a};
        have_choices = true;
        break;
      }
    }
    if (i == 0 && !have_choices) break;  // the lowest rectangle must belong to the pair
  }
  if (!have_choices) {
    throw Error(ErrorCode::LayoutNotRecognized, "no pair of choice rectangles found");
  }
  const int cue_bottom = std::min(choices[0].y, choices[1].y);

  std::vector<Rect> cue_rects;
  std::vector<Rect> matched;
  for (const Rect& r : rects) {
    if (r.bottom() > cue_bottom) continue;
    cue_rects.push_back(r);
    if (dims_match(r, choices[0])) matched.push_back(r);
  }
  std::sort(matched.begin(), matched.end(), [](const Rect& a, const Rect& b) { return a.x < b.x; });

  TrialLayout layout;
  layout.choices = choices;
  if (matched.size() == 4) {
    const int gap1 = matched[1].x - matched[0].x;
    for (std::size_t i = 1; i < 4; ++i) {
      if (std::abs((matched[i].x - matched[i - 1].x) - gap1) > 3 ||
          std::abs(matched[i].y - matched[0].y) > 3) {
        throw Error(ErrorCode::LayoutNotRecognized, "cue rectangles are not evenly spaced");
      }
    }
    layout.modality = Modality::Symbolic;
    for (int i = 0; i < 3; ++i) layout.windows[i] = inset(matched[i], 1);
    layout.blank = matched[3];
    return layout;
  }
  if (matched.size() == 1) {
    const Rect blank = matched[0];
    // The cue strip spans every foreground pixel above the choices.
    int minx = screen.width(), miny = screen.height(), maxx = -1, maxy = -1;
    for (int y = 0; y < cue_bottom; ++y) {
      for (int x = 0; x < screen.width(); ++x) {
        if (screen.at(x, y) < kContourThreshold) continue;
        minx = std::min(minx, x);
        maxx = std::max(maxx, x);
        miny = std::min(miny, y);
        maxy = std::max(maxy, y);
      }
    }
    const int strip_w = maxx - minx + 1;
    const int slice_w = strip_w / 4;
    const int strip_h = maxy - miny + 1;
    if (slice_w < kMinSliceWidth || blank.x < minx + 3 * slice_w || blank.right() > maxx + 1) {
      throw Error(ErrorCode::LayoutNotRecognized, "blank does not sit in the last strip slice");
    }
    layout.modality = Modality::Perceptual;
    for (int i = 0; i < 3; ++i) layout.windows[i] = {minx + i * slice_w, miny, slice_w, strip_h};
    layout.blank = blank;
    return layout;
  }
  if (cue_rects.size() == 4 || cue_rects.size() == 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "cue rectangles do not match the choice rectangle dimensions");
  }
  throw Error(ErrorCode::LayoutNotRecognized,
              "found " + std::to_string(matched.size()) + " cue rectangles matching the choices");
}

}  // namespace mr
