#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "mr/image.hpp"

namespace mr {

using Descriptor = std::array<std::uint64_t, 4>;  // 256 bits

inline int hamming(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

/// Keypoint plus steered binary descriptor. Coordinates are level-0 pixels of
/// the window the feature was detected in.
struct Feature {
  double x = 0.0;
  double y = 0.0;
  double orientation = 0.0;  // radians
  int level = 0;
  float score = 0.0f;  // Harris response at the detection level
  Descriptor descriptor{};

  friend bool operator==(const Feature&, const Feature&) = default;
};

struct MatchPair {
  Feature src;
  Feature dst;
  int distance = 0;
};

struct DetectorConfig {
  int max_features = 500;
  int levels = 4;
  double scale_factor = 1.4142135623730951;  // half octave
  int fast_threshold = 20;
  int fast_threshold_floor = 5;
  int min_features = 50;  // below this the FAST threshold is halved and detection rerun
};

/// Smallest window the descriptor patch fits in.
inline constexpr int kMinDetectSize = 32;

/// ORB-style detection: FAST-9 on a half-octave pyramid, Harris ranking,
/// intensity-centroid orientation, steered 256-bit BRIEF. Deterministic.
/// Throws ImageTooSmall below 32x32.
std::vector<Feature> detect(const GrayImage& img, const DetectorConfig& cfg = {});
std::vector<Feature> detect(const GrayImage& img, int max_features);

/// Brute-force Hamming matching of every feature in `a` against `b` with the
/// 0.8 nearest-neighbour ratio test. Sorted by distance ascending.
std::vector<MatchPair> match(const std::vector<Feature>& a, const std::vector<Feature>& b);

inline constexpr double kRatioTest = 0.8;

namespace serial {
std::vector<Feature> detect(const GrayImage& img, const DetectorConfig& cfg = {});
std::vector<MatchPair> match(const std::vector<Feature>& a, const std::vector<Feature>& b);
}  // namespace serial

namespace detail {
/// Max threshold for which (x, y) is still a FAST-9 corner, or 0 if it is none
/// at any threshold. Corner at threshold t iff score > t.
int fast_score(const GrayImage& img, int x, int y);
}  // namespace detail

}  // namespace mr
