#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mr/affine.hpp"
#include "mr/features.hpp"
#include "mr/image.hpp"
#include "mr/rng.hpp"

namespace testsupport {

/// Smooth test pattern: a few anisotropic Gaussian blobs, away from the border.
inline mr::GrayImage gaussian_blobs(int w, int h, std::uint64_t seed, int count = 4) {
  mr::Rng rng(seed);
  struct Blob {
    double x, y, sx, sy, amp;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < count; ++i) {
    blobs.push_back({rng.uniform(0.3 * w, 0.7 * w), rng.uniform(0.3 * h, 0.7 * h), rng.uniform(6, 14),
                     rng.uniform(6, 14), rng.uniform(120, 255)});
  }
  mr::GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0;
      for (const auto& b : blobs) {
        const double dx = (x - b.x) / b.sx, dy = (y - b.y) / b.sy;
        v += b.amp * std::exp(-0.5 * (dx * dx + dy * dy));
      }
      img.at(x, y) = static_cast<std::uint8_t>(std::min(255.0, std::round(v)));
    }
  }
  return img;
}

inline mr::GrayImage random_image(int w, int h, mr::Rng& rng) {
  mr::GrayImage img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

inline void fill_rect(mr::GrayImage& img, int x, int y, int w, int h, std::uint8_t v) {
  for (int j = y; j < y + h; ++j) {
    for (int i = x; i < x + w; ++i) img.at(i, j) = v;
  }
}

inline std::uint64_t count_nonzero(const mr::GrayImage& img) {
  std::uint64_t n = 0;
  for (auto p : img.pixels()) n += p != 0;
  return n;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mr_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline mr::MatchPair make_match(mr::Point2 s, mr::Point2 d) {
  mr::MatchPair m;
  m.src.x = s.x;
  m.src.y = s.y;
  m.dst.x = d.x;
  m.dst.y = d.y;
  return m;
}

/// Random similarity transform that keeps a 200x200 window roughly in view.
inline mr::AffineTransform random_similarity(mr::Rng& rng) {
  const double th = rng.uniform(-M_PI, M_PI);
  const double s = rng.uniform(0.7, 1.4);
  const mr::Point2 c{rng.uniform(80, 120), rng.uniform(80, 120)};
  return mr::AffineTransform::translation(rng.uniform(-20, 20), rng.uniform(-20, 20))
      .after(mr::AffineTransform::rotation(th, c))
      .after(mr::AffineTransform::scaling(s, c));
}

}  // namespace testsupport
