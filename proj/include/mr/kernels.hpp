#pragma once

#include "mr/affine.hpp"
#include "mr/image.hpp"

namespace mr {

/// Binarization direction applied after a saturating sum.
///   Up:   255 where sum >= t, else 0
///   Down: 0 where sum <= 255 - t, else 255
enum class RoundingDirection { Up, Down };

std::string to_string(RoundingDirection d);

/// Inverse-mapping warp with bilinear interpolation; samples outside `src`
/// read as 0. Throws SingularTransform when |det| of the linear part <= 1e-9.
GrayImage warp_affine(const GrayImage& src, const AffineTransform& t, int out_w, int out_h);

/// Saturating per-pixel sum of `accum` and `addend` followed by binarization
/// at `threshold` (1..255) in direction `dir`. Output is strictly {0, 255}.
GrayImage combine_threshold(const GrayImage& accum, const GrayImage& addend, int threshold,
                            RoundingDirection dir);

/// Mean squared intensity difference on the raw 0..255 scale.
double mse(const GrayImage& a, const GrayImage& b);

/// Single-threaded reference kernels. Same contracts as above; kept for
/// cross-checking the OpenMP versions and for benchmarking.
namespace serial {
GrayImage warp_affine(const GrayImage& src, const AffineTransform& t, int out_w, int out_h);
GrayImage combine_threshold(const GrayImage& accum, const GrayImage& addend, int threshold,
                            RoundingDirection dir);
double mse(const GrayImage& a, const GrayImage& b);
}  // namespace serial

}  // namespace mr
