#include "mr/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mr/affine.hpp"
#include "mr/error.hpp"
#include "mr/rng.hpp"

namespace mr {

namespace {

constexpr int kPatchRadius = 15;
constexpr int kEdge = kPatchRadius;  // keypoints need a full patch around them
constexpr int kPatternRadius = 14;
constexpr int kDescriptorBits = 256;

struct PatternPoint {
  double x1, y1, x2, y2;
};

// Fixed test-pair pattern: isotropic Gaussian (sigma = patch/5) clipped to a
// disc so that any rotation stays inside the patch.
const std::array<PatternPoint, kDescriptorBits>& brief_pattern() {
  static const auto pattern = [] {
    std::array<PatternPoint, kDescriptorBits> p{};
    Rng rng(0x0B12'1EF5ULL);
    const double sigma = 31.0 / 5.0;
    auto draw = [&](double& x, double& y) {
      do {
        x = rng.normal() * sigma;
        y = rng.normal() * sigma;
      } while (x * x + y * y > kPatternRadius * kPatternRadius);
    };
    for (auto& pt : p) {
      do {
        draw(pt.x1, pt.y1);
        draw(pt.x2, pt.y2);
      } while (std::lround(pt.x1) == std::lround(pt.x2) && std::lround(pt.y1) == std::lround(pt.y2));
    }
    return p;
  }();
  return pattern;
}

constexpr int kCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},
                                {2, 2},  {1, 3},  {0, 3},  {-1, 3}, {-2, 2}, {-3, 1},
                                {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

struct Level {
  GrayImage image;
  GrayImage smooth;  // sigma=2 blur for descriptor tests
  double scale = 1.0;  // level-0 pixels per level pixel
};

GrayImage resample(const GrayImage& src, int w, int h, double step) {
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const double sy = std::min(y * step, src.height() - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < w; ++x) {
      const double sx = std::min(x * step, src.width() - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double fx = sx - x0;
      const double v = (src.at(x0, y0) * (1 - fx) + src.at(x1, y0) * fx) * (1 - fy) +
                       (src.at(x0, y1) * (1 - fx) + src.at(x1, y1) * fx) * fy;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

GrayImage gaussian_blur(const GrayImage& src, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += k[i + radius];
  }
  for (auto& v : k) v /= norm;

  const int w = src.width();
  const int h = src.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * src.at(std::clamp(x + i, 0, w - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(acc + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

constexpr double kAntiAlias = 0.5;

std::vector<Level> build_pyramid(const GrayImage& img, const DetectorConfig& cfg) {
  std::vector<Level> levels;
  for (int l = 0; l < cfg.levels; ++l) {
    const double scale = std::pow(cfg.scale_factor, l);
    const int w = static_cast<int>(std::lround(img.width() / scale));
    const int h = static_cast<int>(std::lround(img.height() / scale));
    if (w < 2 * kEdge + 2 || h < 2 * kEdge + 2) break;
    Level level;
    level.scale = scale;
    // Each level is decimated straight from level 0 after an anti-alias blur.
    level.image = l == 0 ? img : resample(gaussian_blur(img, kAntiAlias * std::sqrt(scale * scale - 1.0)), w, h, scale);
    level.smooth = gaussian_blur(level.image, 2.0);
    levels.push_back(std::move(level));
  }
  return levels;
}

double harris_response(const GrayImage& img, int cx, int cy) {
  constexpr int kBlock = 3;  // 7x7 window
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (int y = cy - kBlock; y <= cy + kBlock; ++y) {
    for (int x = cx - kBlock; x <= cx + kBlock; ++x) {
      const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      sxx += gx * gx;
      syy += gy * gy;
      sxy += gx * gy;
    }
  }
  const double tr = sxx + syy;
  return (sxx * syy - sxy * sxy) - 0.04 * tr * tr;
}

// Vertex of the parabola through (-1, m), (0, c), (1, p); 0 unless c is a
// local maximum.
double parabola_peak(double m, double c, double p) {
  const double curvature = m - 2.0 * c + p;
  if (curvature >= 0.0) return 0.0;
  return std::clamp(0.5 * (m - p) / curvature, -0.5, 0.5);
}

// Full-resolution position of a keypoint found at pyramid scale `scale`:
// strongest Harris response within half a level pixel of the projected
// location, refined to sub-pixel precision.
Point2 localize(const GrayImage& base, double px, double py, double scale) {
  const int cx = static_cast<int>(std::lround(px));
  const int cy = static_cast<int>(std::lround(py));
  const int reach = static_cast<int>(std::ceil(0.5 * scale - 1e-9));
  int bx = cx, by = cy;
  double best = harris_response(base, cx, cy);
  for (int y = cy - reach; y <= cy + reach; ++y) {
    for (int x = cx - reach; x <= cx + reach; ++x) {
      const double r = harris_response(base, x, y);
      if (r > best) {
        best = r;
        bx = x;
        by = y;
      }
    }
  }
  const double ox = parabola_peak(harris_response(base, bx - 1, by), best, harris_response(base, bx + 1, by));
  const double oy = parabola_peak(harris_response(base, bx, by - 1), best, harris_response(base, bx, by + 1));
  return {bx + ox, by + oy};
}

double centroid_orientation(const GrayImage& img, int cx, int cy) {
  double m01 = 0.0, m10 = 0.0;
  for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
    for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
      if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
      const double v = img.at(cx + dx, cy + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  return std::atan2(m01, m10);
}

Descriptor steered_brief(const GrayImage& smooth, int cx, int cy, double angle) {
  const double cs = std::cos(angle);
  const double sn = std::sin(angle);
  Descriptor d{};
  const auto& pattern = brief_pattern();
  for (int i = 0; i < kDescriptorBits; ++i) {
    const auto& p = pattern[i];
    const int x1 = cx + static_cast<int>(std::lround(cs * p.x1 - sn * p.y1));
    const int y1 = cy + static_cast<int>(std::lround(sn * p.x1 + cs * p.y1));
    const int x2 = cx + static_cast<int>(std::lround(cs * p.x2 - sn * p.y2));
    const int y2 = cy + static_cast<int>(std::lround(sn * p.x2 + cs * p.y2));
    if (smooth.at(x1, y1) < smooth.at(x2, y2)) d[i / 64] |= (1ULL << (i % 64));
  }
  return d;
}

// FAST-9 score map of one row band; scores <= threshold are stored as 0.
void score_row(const GrayImage& img, int y, int threshold, std::vector<int>& scores) {
  const int w = img.width();
  for (int x = kEdge; x < w - kEdge; ++x) {
    // Any 9-arc covers two adjacent compass points; reject cheaply first.
    const int p = img.at(x, y);
    int bright = 0, dark = 0;
    for (int c = 0; c < 16; c += 4) {
      const int d = img.at(x + kCircle[c][0], y + kCircle[c][1]) - p;
      bright += d > threshold;
      dark += d < -threshold;
    }
    if (bright < 2 && dark < 2) {
      scores[static_cast<std::size_t>(y) * w + x] = 0;
      continue;
    }
    const int s = detail::fast_score(img, x, y);
    scores[static_cast<std::size_t>(y) * w + x] = s > threshold ? s : 0;
  }
}

struct Candidate {
  int x, y;
};

void collect_row(const std::vector<int>& scores, int w, int y, std::vector<Candidate>& out) {
  for (int x = kEdge; x < w - kEdge; ++x) {
    const int s = scores[static_cast<std::size_t>(y) * w + x];
    if (s == 0) continue;
    bool is_max = true;
    for (int dy = -1; dy <= 1 && is_max; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int n = scores[static_cast<std::size_t>(y + dy) * w + x + dx];
        // Ties go to the neighbour earlier in raster order.
        const bool earlier = dy < 0 || (dy == 0 && dx < 0);
        if (n > s || (n == s && earlier)) {
          is_max = false;
          break;
        }
      }
    }
    if (is_max) out.push_back({x, y});
  }
}

template <bool Parallel>
std::vector<Feature> detect_level(const Level& level, int level_index, int threshold, const GrayImage& base) {
  const GrayImage& img = level.image;
  const int w = img.width();
  const int h = img.height();
  std::vector<int> scores(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::vector<Candidate>> rows(h);

  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (int y = kEdge; y < h - kEdge; ++y) score_row(img, y, threshold, scores);
#pragma omp parallel for schedule(static)
    for (int y = kEdge; y < h - kEdge; ++y) collect_row(scores, w, y, rows[y]);
  } else {
    for (int y = kEdge; y < h - kEdge; ++y) score_row(img, y, threshold, scores);
    for (int y = kEdge; y < h - kEdge; ++y) collect_row(scores, w, y, rows[y]);
  }

  std::vector<Candidate> cands;
  for (const auto& r : rows) cands.insert(cands.end(), r.begin(), r.end());

  std::vector<Feature> out(cands.size());
  auto describe = [&](std::size_t i) {
    const auto [x, y] = cands[i];
    Feature f;
    const Point2 p = localize(base, x * level.scale, y * level.scale, level.scale);
    f.x = p.x;
    f.y = p.y;
    f.level = level_index;
    f.score = static_cast<float>(harris_response(img, x, y));
    f.orientation = centroid_orientation(img, x, y);
    f.descriptor = steered_brief(level.smooth, x, y, f.orientation);
    out[i] = f;
  };
  const long n = static_cast<long>(cands.size());
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (long i = 0; i < n; ++i) describe(static_cast<std::size_t>(i));
  } else {
    for (long i = 0; i < n; ++i) describe(static_cast<std::size_t>(i));
  }
  return out;
}

template <bool Parallel>
std::vector<Feature> detect_impl(const GrayImage& img, const DetectorConfig& cfg) {
  if (img.width() < kMinDetectSize || img.height() < kMinDetectSize) {
    throw Error(ErrorCode::ImageTooSmall, "detection needs at least 32x32 pixels, got " +
                                              std::to_string(img.width()) + "x" +
                                              std::to_string(img.height()));
  }
  const auto pyramid = build_pyramid(img, cfg);

  std::vector<Feature> all;
  int threshold = cfg.fast_threshold;
  while (true) {
    all.clear();
    for (std::size_t l = 0; l < pyramid.size(); ++l) {
      auto feats = detect_level<Parallel>(pyramid[l], static_cast<int>(l), threshold, pyramid[0].image);
      all.insert(all.end(), feats.begin(), feats.end());
    }
    if (static_cast<int>(all.size()) >= cfg.min_features || threshold <= cfg.fast_threshold_floor) {
      break;
    }
    threshold = std::max(cfg.fast_threshold_floor, threshold / 2);
  }

  std::sort(all.begin(), all.end(), [](const Feature& a, const Feature& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.level < b.level;
  });
  if (static_cast<int>(all.size()) > cfg.max_features) all.resize(cfg.max_features);
  return all;
}

struct Nearest {
  int best = -1;
  int d1 = kDescriptorBits + 1;
  int d2 = kDescriptorBits + 1;
};

Nearest nearest_two(const Descriptor& q, const std::vector<Feature>& b) {
  Nearest n;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const int d = hamming(q, b[j].descriptor);
    if (d < n.d1) {
      n.d2 = n.d1;
      n.d1 = d;
      n.best = static_cast<int>(j);
    } else if (d < n.d2) {
      n.d2 = d;
    }
  }
  return n;
}

bool passes_ratio(const Nearest& n, std::size_t candidates) {
  if (n.best < 0) return false;
  if (candidates == 1) return true;
  // d1 < 0.8 * d2 in integers.
  return 5 * n.d1 < 4 * n.d2;
}

template <bool Parallel>
std::vector<MatchPair> match_impl(const std::vector<Feature>& a, const std::vector<Feature>& b) {
  if (a.empty() || b.empty()) return {};
  std::vector<Nearest> nn(a.size());
  const long n = static_cast<long>(a.size());
  if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) nn[i] = nearest_two(a[i].descriptor, b);
  } else {
    for (long i = 0; i < n; ++i) nn[i] = nearest_two(a[i].descriptor, b);
  }
  std::vector<MatchPair> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (passes_ratio(nn[i], b.size())) out.push_back({a[i], b[nn[i].best], nn[i].d1});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const MatchPair& x, const MatchPair& y) { return x.distance < y.distance; });
  return out;
}

}  // namespace

namespace detail {

int fast_score(const GrayImage& img, int x, int y) {
  const int p = img.at(x, y);
  int diff[16];
  for (int i = 0; i < 16; ++i) diff[i] = img.at(x + kCircle[i][0], y + kCircle[i][1]) - p;

  // Largest t such that 9 contiguous circle pixels all exceed p + t (bright)
  // or all fall below p - t (dark).
  int best = 0;
  for (int start = 0; start < 16; ++start) {
    int bright = 1 << 20;
    int dark = 1 << 20;
    for (int k = 0; k < 9; ++k) {
      const int d = diff[(start + k) & 15];
      bright = std::min(bright, d);
      dark = std::min(dark, -d);
    }
    best = std::max({best, bright, dark});
  }
  return best;
}

}  // namespace detail

namespace serial {
std::vector<Feature> detect(const GrayImage& img, const DetectorConfig& cfg) {
  return detect_impl<false>(img, cfg);
}
std::vector<MatchPair> match(const std::vector<Feature>& a, const std::vector<Feature>& b) {
  return match_impl<false>(a, b);
}
}  // namespace serial

std::vector<Feature> detect(const GrayImage& img, const DetectorConfig& cfg) {
  return detect_impl<true>(img, cfg);
}

std::vector<Feature> detect(const GrayImage& img, int max_features) {
  DetectorConfig cfg;
  cfg.max_features = max_features;
  return detect_impl<true>(img, cfg);
}

std::vector<MatchPair> match(const std::vector<Feature>& a, const std::vector<Feature>& b) {
  return match_impl<true>(a, b);
}

}  // namespace mr
