#pragma once

#include <array>
#include <string>
#include <vector>

#include "mr/affine.hpp"
#include "mr/image.hpp"

namespace mr {

enum class Condition { SymbolicMatching, SymbolicReasoning, PerceptualMatching, PerceptualReasoning };
enum class Modality { Symbolic, Perceptual };

inline constexpr std::array<Condition, 4> kAllConditions = {
    Condition::SymbolicMatching, Condition::SymbolicReasoning, Condition::PerceptualMatching,
    Condition::PerceptualReasoning};

Modality modality_of(Condition c);
bool is_reasoning(Condition c);
std::string to_string(Condition c);
std::string to_string(Modality m);
Condition condition_from_string(const std::string& s);

struct Polygon {
  std::vector<Point2> vertices;
};

/// Attention windows of one trial screen.
///
/// `windows` are the content regions of cues A, B, C. Symbolic windows are the
/// cue box interiors (frame inset by one pixel); perceptual windows are the
/// first three quarter-slices of the cue strip. `blank` and `choices` are the
/// drawn frame rectangles.
struct TrialLayout {
  Modality modality = Modality::Symbolic;
  std::array<Rect, 3> windows{};
  Rect blank{};
  std::array<Rect, 2> choices{};

  friend bool operator==(const TrialLayout&, const TrialLayout&) = default;
};

/// Region of the to-be-predicted panel D: the next window after C, at the
/// spacing of A, B, C.
Rect target_window(const TrialLayout& layout);

/// Blank interior expressed in the coordinates of target_window().
Rect blank_in_target(const TrialLayout& layout);

/// Choice interior, excluding the one-pixel drawn border.
inline Rect choice_content(const Rect& choice) { return inset(choice, 1); }

inline constexpr int kContourThreshold = 40;
inline constexpr double kSimplifyTolerancePx = 2.0;

/// Binarizes at `binarize_threshold` (pixel >= threshold is foreground),
/// traces the outer border of every 8-connected component by Suzuki-Abe
/// border following and simplifies each border by Douglas-Peucker at 2 px.
/// Borders that collapse below three vertices are dropped.
std::vector<Polygon> find_contours(const GrayImage& img, int binarize_threshold = kContourThreshold);

/// Closed-curve Douglas-Peucker.
std::vector<Point2> simplify_closed(const std::vector<Point2>& ring, double tolerance);

/// Keeps 4-vertex polygons with all interior angles within 10 degrees of 90,
/// area at least 95% of the vertex bounding box, and a box of at least 10x10;
/// emits the axis-aligned bounding boxes.
std::vector<Rect> detect_rectangles(const std::vector<Polygon>& polys);

/// Locates cue windows, blank and choices on a rendered trial screen.
/// Throws LayoutNotRecognized or DimensionMismatch.
TrialLayout identify_layout(const GrayImage& screen);

}  // namespace mr
