#include "mr/affine.hpp"

#include <algorithm>
#include <cstdio>

namespace mr {

AffineTransform AffineTransform::rotation(double radians, Point2 center) {
  const double cs = std::cos(radians);
  const double sn = std::sin(radians);
  return {cs, -sn, center.x - cs * center.x + sn * center.y,
          sn, cs,  center.y - sn * center.x - cs * center.y};
}

AffineTransform AffineTransform::scaling(double s, Point2 center) {
  return {s, 0, center.x * (1 - s), 0, s, center.y * (1 - s)};
}

bool AffineTransform::finite() const {
  for (double v : entries()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::optional<AffineTransform> AffineTransform::inverse() const {
  const double dt = det();
  if (!(std::abs(dt) > kSingularDet)) return std::nullopt;
  const double ia = d / dt;
  const double ib = -b / dt;
  const double ic = -c / dt;
  const double id = a / dt;
  return AffineTransform{ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
}

AffineTransform AffineTransform::after(const AffineTransform& f) const {
  return {a * f.a + b * f.c, a * f.b + b * f.d, a * f.tx + b * f.ty + tx,
          c * f.a + d * f.c, c * f.b + d * f.d, c * f.tx + d * f.ty + ty};
}

double AffineTransform::max_abs_diff(const AffineTransform& o) const {
  const auto x = entries();
  const auto y = o.entries();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

Classification classify(const AffineTransform& t) {
  constexpr double kTol = 0.02;
  Classification out;
  out.angle_deg = std::atan2(t.c, t.a) * 180.0 / M_PI;
  out.scale = std::sqrt(std::abs(t.det()));
  out.shift_x = t.tx;
  out.shift_y = t.ty;

  const double lin_dev = std::max({std::abs(t.a - 1), std::abs(t.b), std::abs(t.c), std::abs(t.d - 1)});
  if (lin_dev < kTol) {
    out.kind = std::hypot(t.tx, t.ty) < 1.5 ? TransformClass::Identity : TransformClass::Translation;
    return out;
  }

  // Orthogonality of L / s: columns unit length and perpendicular.
  auto orthogonal_dev = [&](double s) {
    const double a = t.a / s, b = t.b / s, c = t.c / s, d = t.d / s;
    return std::max({std::abs(a * a + c * c - 1), std::abs(b * b + d * d - 1), std::abs(a * b + c * d)});
  };
  const double dt = t.det();
  if (orthogonal_dev(1.0) < kTol && std::abs(dt - 1.0) < kTol) {
    out.kind = TransformClass::RotationTranslation;
    return out;
  }
  if (dt > 0 && out.scale >= 0.2 && out.scale <= 5.0 && orthogonal_dev(out.scale) < kTol) {
    out.kind = TransformClass::Similarity;
    return out;
  }
  out.kind = TransformClass::GeneralAffine;
  return out;
}

std::string to_string(TransformClass k) {
  switch (k) {
    case TransformClass::Identity: return "Identity";
    case TransformClass::Translation: return "Translation";
    case TransformClass::RotationTranslation: return "Rotation+Translation";
    case TransformClass::Similarity: return "Similarity";
    case TransformClass::GeneralAffine: return "GeneralAffine";
  }
  return "GeneralAffine";
}

std::string describe(const Classification& c) {
  char buf[160];
  switch (c.kind) {
    case TransformClass::Identity:
      return "Identity";
    case TransformClass::Translation:
      std::snprintf(buf, sizeof buf, "Translation(shift=(%.1f,%.1f))", c.shift_x, c.shift_y);
      break;
    case TransformClass::RotationTranslation:
      std::snprintf(buf, sizeof buf, "Rotation+Translation(angle=%.1f, shift=(%.1f,%.1f))",
                    c.angle_deg, c.shift_x, c.shift_y);
      break;
    case TransformClass::Similarity:
      std::snprintf(buf, sizeof buf, "Similarity(angle=%.1f, scale=%.3f, shift=(%.1f,%.1f))",
                    c.angle_deg, c.scale, c.shift_x, c.shift_y);
      break;
    case TransformClass::GeneralAffine:
      std::snprintf(buf, sizeof buf, "GeneralAffine(angle=%.1f, scale=%.3f, shift=(%.1f,%.1f))",
                    c.angle_deg, c.scale, c.shift_x, c.shift_y);
      break;
  }
  return buf;
}

}  // namespace mr
