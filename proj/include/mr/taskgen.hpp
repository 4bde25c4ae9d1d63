#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mr/attention.hpp"
#include "mr/image.hpp"
#include "mr/raster.hpp"

namespace mr {

enum class RuleKind { Identity, RotateBy, TranslateBy, AddPart, SubtractPart, ScaleBy };

std::string to_string(RuleKind k);
RuleKind rule_kind_from_string(const std::string& s);

/// Generating rule of a series. Geometric rules act about the panel centre.
/// AddPart: application k adds part k of the glyph's part inventory.
/// SubtractPart: application k removes part k-1.
struct Rule {
  RuleKind kind = RuleKind::Identity;
  double angle_deg = 0.0;  // RotateBy; also the slot spacing of part rules
  double dx = 0.0;         // TranslateBy
  double dy = 0.0;
  double factor = 1.0;     // ScaleBy
  int part = 0;            // part rules: part touched by the first application

  /// Single-step map of the geometric rules on a panel of the given size.
  AffineTransform step_transform(int panel_size) const;
  bool is_geometric() const;
};

/// Vector glyph: `body` moves with geometric rules and is always drawn; `parts`
/// is the slot inventory used by the part rules.
struct GlyphSpec {
  Shape body;
  std::vector<Shape> parts;
  int initial_parts = 0;  // parts present in panel A
};

/// Continuous periodic texture; `offset` picks the region shown in panel A.
struct TextureSpec {
  std::shared_ptr<const PeriodicTile> tile;
  Point2 offset{};
};

using BaseSpec = std::variant<GlyphSpec, TextureSpec>;

/// Panel state reached after some rule applications plus an optional extra
/// perturbation; used for both series panels and distractors.
struct PanelState {
  AffineTransform transform;        // geometric map applied to the base
  std::vector<int> parts;           // part slots drawn (glyphs only)
};

inline constexpr int kPanelSize = 200;

/// panel[k] = rule applied k times to the base. Throws OutOfBoundsRule when
/// glyph content leaves the panel.
std::vector<GrayImage> render_rule_series(const BaseSpec& base, const Rule& rule, int n,
                                          int panel_size = kPanelSize);

GrayImage render_panel(const BaseSpec& base, const PanelState& state, int panel_size = kPanelSize);
PanelState rule_state(const BaseSpec& base, const Rule& rule, int applications, int panel_size = kPanelSize);

/// Glyph with axis-aligned edges and a notch, used by the rotation tests.
GlyphSpec notched_square_glyph(Point2 center, double half_size);
/// Hexagram outline with six fillable point triangles as parts.
GlyphSpec hexagram_glyph(Point2 center, double radius, int initial_parts);
/// Stripes whose intensity varies only along x.
TextureSpec stripe_texture(int period_px, int stripe_px, int lo, int hi);

struct TrialMeta {
  std::string id;
  Condition condition = Condition::SymbolicMatching;
  Rule rule;
  int correct = 0;
  bool mirrored = false;
  std::string cue_path;                  // relative to the dataset directory
  std::array<std::string, 2> choice_paths;
  TrialLayout layout;                    // ground truth
  int base_index = 0;
};

/// Everything generated for one trial. `choices` hold the choice rectangles
/// including their one-pixel frame, as drawn on the screen.
struct Trial {
  TrialMeta meta;
  GrayImage cue_screen;
  std::array<GrayImage, 2> choices;
  std::array<GrayImage, 4> panels;  // A, B, C and the correct D (window content)
  GrayImage distractor_panel;
};

struct TrialManifest {
  std::uint64_t dataset_seed = 0;
  std::vector<TrialMeta> trials;

  std::array<int, 4> counts() const;
  const TrialMeta& find(const std::string& id) const;
};

/// Renders one trial (condition, base cue, presentation 0..3) of a dataset.
Trial generate_trial(std::uint64_t seed, Condition condition, int base_index, int presentation);

/// Window content of the first `n` panels of a trial's series (A, B, C, D,
/// then further rule applications), mirrored like the trial. May throw
/// OutOfBoundsRule for glyph series continued past panel D.
std::vector<GrayImage> render_trial_series(std::uint64_t seed, Condition condition, int base_index,
                                           int presentation, int n);

/// Writes 384 cue screens, 768 choice images and manifest.json to `out_dir`.
TrialManifest generate_dataset(std::uint64_t seed, const std::filesystem::path& out_dir);

void save_manifest(const TrialManifest& m, const std::filesystem::path& path);
TrialManifest load_manifest(const std::filesystem::path& dataset_dir);

inline constexpr int kBasesPerCondition = 24;
inline constexpr int kPresentations = 4;

}  // namespace mr
