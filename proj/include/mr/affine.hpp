#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>

namespace mr {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// 2x3 affine map [[a, b, tx], [c, d, ty]] sending (x, y) to
/// (a*x + b*y + tx, c*x + d*y + ty).
struct AffineTransform {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }
  /// Counter-clockwise in the usual maths orientation, which appears clockwise
  /// on screen because image y grows downward.
  static AffineTransform rotation(double radians, Point2 center = {});
  static AffineTransform scaling(double s, Point2 center = {});

  Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
  double det() const { return a * d - b * c; }
  bool finite() const;

  /// Inverse map; std::nullopt when |det| <= 1e-9.
  std::optional<AffineTransform> inverse() const;

  /// (*this) after `first`: x -> this(first(x)).
  AffineTransform after(const AffineTransform& first) const;

  std::array<double, 6> entries() const { return {a, b, tx, c, d, ty}; }
  /// Largest absolute entry-wise difference.
  double max_abs_diff(const AffineTransform& o) const;

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

inline constexpr double kSingularDet = 1e-9;

enum class TransformClass { Identity, Translation, RotationTranslation, Similarity, GeneralAffine };

struct Classification {
  TransformClass kind = TransformClass::GeneralAffine;
  double angle_deg = 0.0;  // atan2(c, a)
  double scale = 1.0;      // sqrt(|det|)
  double shift_x = 0.0;
  double shift_y = 0.0;
};

Classification classify(const AffineTransform& t);

std::string to_string(TransformClass k);
/// Human-readable single line, e.g. "Rotation+Translation(angle=90.0, shift=(10.0,0.0))".
std::string describe(const Classification& c);

}  // namespace mr
