#include <doctest.h>

#include <algorithm>

#include "mr/error.hpp"
#include "mr/kernels.hpp"
#include "mr/raster.hpp"
#include "support.hpp"

using namespace mr;

namespace {

// Random star-shaped glyph cluster with plenty of corners.
GrayImage glyph_scene(int size, std::uint64_t seed) {
  Rng rng(seed);
  Shape s;
  for (int g = 0; g < 5; ++g) {
    const Point2 c{rng.uniform(0.3 * size, 0.7 * size), rng.uniform(0.3 * size, 0.7 * size)};
    const int k = 3 + static_cast<int>(rng.index(4));
    std::vector<Point2> ring;
    const double r = rng.uniform(0.08, 0.16) * size;
    for (int i = 0; i < k; ++i) {
      const double a = 2 * M_PI * (i + rng.uniform(-0.3, 0.3)) / k;
      ring.push_back({c.x + r * rng.uniform(0.5, 1.0) * std::cos(a), c.y + r * rng.uniform(0.5, 1.0) * std::sin(a)});
    }
    s.polygons.push_back(ring);
  }
  return rasterize(s, size, size);
}

bool near_feature(const std::vector<Feature>& fs, double x, double y, double tol) {
  return std::any_of(fs.begin(), fs.end(), [&](const Feature& f) { return std::hypot(f.x - x, f.y - y) <= tol; });
}

// Independent FAST-9 oracle on the radius-3 Bresenham circle.
int fast_oracle(const GrayImage& img, int x, int y) {
  static const int circle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                    {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};
  const int p = img.at(x, y);
  int count = 0;
  for (int t = 0; t <= 255; ++t) {
    bool corner = false;
    for (int start = 0; start < 16 && !corner; ++start) {
      bool all_bright = true, all_dark = true;
      for (int k = 0; k < 9; ++k) {
        const int v = img.at(x + circle[(start + k) % 16][0], y + circle[(start + k) % 16][1]);
        all_bright &= v > p + t;
        all_dark &= v < p - t;
      }
      corner = all_bright || all_dark;
    }
    count += corner;
  }
  return count;
}

}  // namespace

TEST_CASE("uniform image has no features") {
  CHECK(detect(GrayImage(64, 64)).empty());
  CHECK(detect(GrayImage(64, 64, 130)).empty());
}

TEST_CASE("detector rejects windows below 32x32") {
  try {
    detect(GrayImage(31, 40));
    FAIL("expected ImageTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ImageTooSmall);
  }
}

TEST_CASE("square corners are detected") {
  GrayImage img(100, 100);
  testsupport::fill_rect(img, 30, 30, 40, 40, 255);
  const auto fs = detect(img);
  REQUIRE(fs.size() >= 4);
  for (auto [x, y] : {std::pair{30, 30}, std::pair{69, 30}, std::pair{30, 69}, std::pair{69, 69}}) {
    CHECK_MESSAGE(near_feature(fs, x, y, 3.0), "corner " << x << "," << y);
  }
}

TEST_CASE("detection is deterministic, bounded and sorted") {
  const GrayImage img = glyph_scene(200, 9);
  const auto a = detect(img), b = detect(img);
  CHECK(a == b);
  CHECK(a.size() <= 500);
  CHECK(detect(img, 20).size() <= 20);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].score >= a[i].score);
  for (const auto& f : a) {
    CHECK(f.x >= 0);
    CHECK(f.y >= 0);
    CHECK(f.x < img.width());
    CHECK(f.y < img.height());
    CHECK(f.level >= 0);
    CHECK(f.level < 4);
  }
}

TEST_CASE("fast_score agrees with a brute-force threshold sweep") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    GrayImage img(12, 12);
    // Mix of random pixels and structured corners.
    if (trial % 2) {
      img = testsupport::random_image(12, 12, rng);
    } else {
      testsupport::fill_rect(img, static_cast<int>(rng.index(6)), static_cast<int>(rng.index(6)), 6, 6,
                             static_cast<std::uint8_t>(rng.index(256)));
    }
    for (int y = 3; y < 9; ++y) {
      for (int x = 3; x < 9; ++x) CHECK(detail::fast_score(img, x, y) == fast_oracle(img, x, y));
    }
  }
}

TEST_CASE("detector is translation covariant") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const GrayImage base = glyph_scene(160, seed);
    const int dx = 7, dy = 4;
    GrayImage big(200, 200), moved(200, 200);
    paste(big, base, 20, 20);
    paste(moved, base, 20 + dx, 20 + dy);
    const auto fa = detect(big), fb = detect(moved);
    REQUIRE(!fa.empty());
    int hits = 0;
    for (const auto& f : fa) hits += near_feature(fb, f.x + dx, f.y + dy, 1.0);
    CHECK(hits >= 0.8 * static_cast<double>(fa.size()));
  }
}

TEST_CASE("match handles empty and single-target sets") {
  const auto fs = detect(glyph_scene(120, 4));
  REQUIRE(fs.size() > 2);
  CHECK(match({}, fs).empty());
  CHECK(match(fs, {}).empty());
  const auto one = match(fs, {fs[0]});
  CHECK(one.size() == fs.size());
}

TEST_CASE("self match pairs every distinct descriptor at distance zero") {
  const auto fs = detect(glyph_scene(200, 12));
  std::vector<Feature> copy = fs;
  for (auto& f : copy) f.x += 1000;  // distinct features, same descriptors
  const auto ms = match(fs, copy);
  std::size_t unique = 0;
  for (const auto& f : fs) {
    unique += std::count_if(fs.begin(), fs.end(), [&](const Feature& g) { return g.descriptor == f.descriptor; }) == 1;
  }
  CHECK(ms.size() == unique);
  for (const auto& m : ms) CHECK(m.distance == 0);
}

TEST_CASE("match output obeys distance, ratio and order contracts") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const GrayImage a = glyph_scene(200, seed);
    const GrayImage b = warp_affine(a, AffineTransform::rotation(0.2, {99.5, 99.5}), 200, 200);
    const auto fa = detect(a), fb = detect(b);
    const auto ms = match(fa, fb);
    for (std::size_t i = 0; i < ms.size(); ++i) {
      CHECK(ms[i].distance == hamming(ms[i].src.descriptor, ms[i].dst.descriptor));
      if (i) CHECK(ms[i - 1].distance <= ms[i].distance);
      // Every competitor lies beyond distance / 0.8.
      int competitors_close = 0;
      for (const auto& f : fb) {
        if (f == ms[i].dst) continue;
        competitors_close += hamming(ms[i].src.descriptor, f.descriptor) * 0.8 <= ms[i].distance;
      }
      CHECK(competitors_close == 0);
    }
  }
}

TEST_CASE("rotated glyph matches land on the true correspondence") {
  const Point2 c{99.5, 99.5};
  const auto t = AffineTransform::rotation(15.0 * M_PI / 180.0, c);
  int passed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const GrayImage a = glyph_scene(200, seed);
    const GrayImage b = warp_affine(a, t, 200, 200);
    const auto ms = match(detect(a), detect(b));
    if (ms.empty()) continue;
    int good = 0;
    std::vector<int> d;
    for (const auto& m : ms) {
      const Point2 p = t.apply({m.src.x, m.src.y});
      good += std::hypot(p.x - m.dst.x, p.y - m.dst.y) <= 3.0;
      d.push_back(m.distance);
    }
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    passed += good >= 0.6 * static_cast<double>(ms.size()) && d[d.size() / 2] < 64;
  }
  CHECK(passed >= 9);
}
