#include "mr/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "mr/error.hpp"
#include "mr/kernels.hpp"
#include "mr/rng.hpp"

namespace mr {

using nlohmann::json;

std::string to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Identity: return "Identity";
    case RuleKind::RotateBy: return "RotateBy";
    case RuleKind::TranslateBy: return "TranslateBy";
    case RuleKind::AddPart: return "AddPart";
    case RuleKind::SubtractPart: return "SubtractPart";
    case RuleKind::ScaleBy: return "ScaleBy";
  }
  return "Identity";
}

RuleKind rule_kind_from_string(const std::string& s) {
  for (RuleKind k : {RuleKind::Identity, RuleKind::RotateBy, RuleKind::TranslateBy, RuleKind::AddPart,
                     RuleKind::SubtractPart, RuleKind::ScaleBy}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown rule kind '" + s + "'");
}

namespace {

constexpr double deg2rad(double d) { return d * M_PI / 180.0; }

Point2 panel_center(int n) { return {0.5 * (n - 1), 0.5 * (n - 1)}; }

}  // namespace

bool Rule::is_geometric() const {
  return kind == RuleKind::RotateBy || kind == RuleKind::TranslateBy || kind == RuleKind::ScaleBy;
}

AffineTransform Rule::step_transform(int panel_size) const {
  const Point2 c = panel_center(panel_size);
  switch (kind) {
    case RuleKind::RotateBy: return AffineTransform::rotation(deg2rad(angle_deg), c);
    case RuleKind::TranslateBy: return AffineTransform::translation(dx, dy);
    case RuleKind::ScaleBy: return AffineTransform::scaling(factor, c);
    default: return AffineTransform::identity();
  }
}

PanelState rule_state(const BaseSpec& base, const Rule& rule, int k, int panel_size) {
  const Point2 c = panel_center(panel_size);
  PanelState s;
  switch (rule.kind) {
    case RuleKind::RotateBy: s.transform = AffineTransform::rotation(deg2rad(rule.angle_deg * k), c); break;
    case RuleKind::TranslateBy: s.transform = AffineTransform::translation(rule.dx * k, rule.dy * k); break;
    case RuleKind::ScaleBy: s.transform = AffineTransform::scaling(std::pow(rule.factor, k), c); break;
    default: break;
  }
  if (const auto* g = std::get_if<GlyphSpec>(&base)) {
    const int n = static_cast<int>(g->parts.size());
    int lo = 0, hi = g->initial_parts;  // [lo, hi)
    if (rule.kind == RuleKind::AddPart) hi = g->initial_parts + k;
    if (rule.kind == RuleKind::SubtractPart) lo = k;
    if (hi > n || lo > hi) throw Error(ErrorCode::OutOfBoundsRule, "part rule exceeds the part inventory");
    for (int i = lo; i < hi; ++i) s.parts.push_back(i);
  }
  return s;
}

GrayImage render_panel(const BaseSpec& base, const PanelState& state, int panel_size) {
  if (const auto* g = std::get_if<GlyphSpec>(&base)) {
    Shape shape = g->body;
    for (int i : state.parts) shape.append(g->parts.at(static_cast<std::size_t>(i)));
    return rasterize(shape.transformed(state.transform), panel_size, panel_size);
  }
  const auto& t = std::get<TextureSpec>(base);
  const auto inv = state.transform.inverse();
  if (!inv) throw Error(ErrorCode::SingularTransform, "texture panel transform is singular");
  const AffineTransform to_tile = AffineTransform::translation(t.offset.x, t.offset.y).after(*inv);
  return render_tile(*t.tile, to_tile, panel_size, panel_size);
}

namespace {

constexpr double kGlyphMargin = 3.0;

void check_glyph_bounds(const BaseSpec& base, const PanelState& s, int panel_size) {
  const auto* g = std::get_if<GlyphSpec>(&base);
  if (!g) return;
  Shape shape = g->body;
  for (int i : s.parts) shape.append(g->parts.at(static_cast<std::size_t>(i)));
  const auto b = shape.transformed(s.transform).bounds();
  if (b[0] < kGlyphMargin || b[1] < kGlyphMargin || b[2] > panel_size - 1 - kGlyphMargin ||
      b[3] > panel_size - 1 - kGlyphMargin) {
    throw Error(ErrorCode::OutOfBoundsRule, "glyph leaves the panel under the rule");
  }
}

}  // namespace

std::vector<GrayImage> render_rule_series(const BaseSpec& base, const Rule& rule, int n, int panel_size) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "series length must be at least 1");
  std::vector<GrayImage> out;
  for (int k = 0; k < n; ++k) {
    const PanelState s = rule_state(base, rule, k, panel_size);
    check_glyph_bounds(base, s, panel_size);
    out.push_back(render_panel(base, s, panel_size));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Glyph and texture inventory

GlyphSpec notched_square_glyph(Point2 c, double h) {
  const double n = h / 2;  // notch half-width and depth
  GlyphSpec g;
  g.body.polygons.push_back({{c.x - h, c.y - h},
                             {c.x - n, c.y - h},
                             {c.x - n, c.y - h + n},
                             {c.x + n, c.y - h + n},
                             {c.x + n, c.y - h},
                             {c.x + h, c.y - h},
                             {c.x + h, c.y + h},
                             {c.x - h, c.y + h}});
  // Off-centre dot breaks the remaining mirror symmetry.
  g.body.append(regular_polygon({c.x + h * 0.45, c.y + h * 1.45}, h * 0.22, 4, 0.3));
  return g;
}

GlyphSpec hexagram_glyph(Point2 c, double radius, int initial_parts) {
  GlyphSpec g;
  const double inner = radius / std::sqrt(3.0);
  std::vector<Point2> up, down;
  for (int i = 0; i < 3; ++i) {
    const double a1 = deg2rad(-90.0 + 120.0 * i);
    const double a2 = deg2rad(90.0 + 120.0 * i);
    up.push_back({c.x + radius * std::cos(a1), c.y + radius * std::sin(a1)});
    down.push_back({c.x + radius * std::cos(a2), c.y + radius * std::sin(a2)});
  }
  g.body = outline(up, 2.5);
  g.body.append(outline(down, 2.5));
  for (int j = 0; j < 6; ++j) {
    const double a = deg2rad(-90.0 + 60.0 * j);
    g.parts.push_back({{{{c.x + radius * std::cos(a), c.y + radius * std::sin(a)},
                         {c.x + inner * std::cos(a + deg2rad(30)), c.y + inner * std::sin(a + deg2rad(30))},
                         {c.x + inner * std::cos(a - deg2rad(30)), c.y + inner * std::sin(a - deg2rad(30))}}}});
  }
  g.initial_parts = initial_parts;
  return g;
}

TextureSpec stripe_texture(int period_px, int stripe_px, int lo, int hi) {
  constexpr int kOversample = 2;
  auto tile = std::make_shared<PeriodicTile>(kPanelSize, kOversample);
  for (int j = 0; j < tile->samples(); ++j) {
    for (int i = 0; i < tile->samples(); ++i) {
      const double x = static_cast<double>(i) / kOversample;
      tile->sample(i, j) = std::fmod(x, period_px) < stripe_px ? hi : lo;
    }
  }
  return {tile, {}};
}

namespace {

// Star-shaped irregular polygon around `c` with a small satellite polygon.
Shape random_glyph(Rng& rng, Point2 c, double r) {
  Shape s;
  const int k = 5 + static_cast<int>(rng.index(4));
  std::vector<Point2> ring;
  const double phase = rng.uniform(0, 2 * M_PI);
  for (int i = 0; i < k; ++i) {
    const double a = phase + 2 * M_PI * (i + rng.uniform(-0.3, 0.3)) / k;
    const double rad = r * rng.uniform(0.5, 1.0);
    ring.push_back({c.x + rad * std::cos(a), c.y + rad * std::sin(a)});
  }
  s.polygons.push_back(ring);
  const double sa = rng.uniform(0, 2 * M_PI);
  const double sd = r * 1.3;
  const int sides = 3 + static_cast<int>(rng.index(2));
  s.append(regular_polygon({c.x + sd * std::cos(sa), c.y + sd * std::sin(sa)}, r * 0.24, sides,
                           rng.uniform(0, M_PI)));
  return s;
}

// Part inventory arranged in `slots` rotational slots around a hub whose
// symmetry matches the slot spacing.
GlyphSpec petal_glyph(Rng& rng, Point2 c, int slots, int initial_parts) {
  GlyphSpec g;
  const double step = 2 * M_PI / slots;
  std::vector<Point2> hub;
  for (int i = 0; i < slots; ++i) {
    hub.push_back({c.x + 22 * std::cos(step * i), c.y + 22 * std::sin(step * i)});
  }
  g.body = outline(hub, 3.0);
  // Irregular quadrilateral petal in slot 0, copied by rotation.
  const double r0 = 34, r1 = rng.uniform(70, 82);
  const double w0 = step * rng.uniform(0.18, 0.28), w1 = step * rng.uniform(0.25, 0.38);
  const double skew = step * rng.uniform(-0.12, 0.12);
  Shape petal{{{{c.x + r0 * std::cos(-w0), c.y + r0 * std::sin(-w0)},
                {c.x + r1 * std::cos(-w1 + skew), c.y + r1 * std::sin(-w1 + skew)},
                {c.x + (r1 - 12) * std::cos(skew), c.y + (r1 - 12) * std::sin(skew)},
                {c.x + r1 * std::cos(w1 + skew * 0.5), c.y + r1 * std::sin(w1 + skew * 0.5)},
                {c.x + r0 * std::cos(w0), c.y + r0 * std::sin(w0)}}}};
  const double phase = -M_PI / 2;
  for (int j = 0; j < slots; ++j) {
    g.parts.push_back(petal.transformed(AffineTransform::rotation(phase + step * j, c)));
  }
  g.initial_parts = initial_parts;
  return g;
}

enum class TextureFamily { Noise, Shards, Dots, Grating };

void paint_wrapped(PeriodicTile& tile, const Shape& shape_px, double value) {
  const int n = tile.samples();
  const double os = tile.oversample();
  const Shape scaled = shape_px.transformed({os, 0, 0, 0, os, 0});
  for (int oy = -1; oy <= 1; ++oy) {
    for (int ox = -1; ox <= 1; ++ox) {
      const Shape moved = scaled.transformed(AffineTransform::translation(ox * n, oy * n));
      const auto b = moved.bounds();
      if (b[2] < 0 || b[3] < 0 || b[0] > n - 1 || b[1] > n - 1) continue;
      const GrayImage mask = rasterize(moved, n, n);
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          if (mask.at(i, j)) tile.sample(i, j) = value;
        }
      }
    }
  }
}

std::shared_ptr<PeriodicTile> make_texture(Rng& rng, TextureFamily family, int lo, int hi) {
  constexpr int kOversample = 2;
  auto tile = std::make_shared<PeriodicTile>(kPanelSize, kOversample);
  const int n = tile->samples();
  const double period = kPanelSize;
  auto fill_noise = [&](int terms, int kmax, double gain) {
    struct Wave {
      int kx, ky;
      double amp, phase;
    };
    std::vector<Wave> waves;
    while (static_cast<int>(waves.size()) < terms) {
      const int kx = static_cast<int>(rng.index(2 * kmax + 1)) - kmax;
      const int ky = static_cast<int>(rng.index(2 * kmax + 1)) - kmax;
      if (kx == 0 && ky == 0) continue;
      waves.push_back({kx, ky, 1.0 / std::sqrt(std::hypot(kx, ky)), rng.uniform(0, 2 * M_PI)});
    }
    std::vector<double> z(static_cast<std::size_t>(n) * n);
    double mean = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / kOversample, y = static_cast<double>(j) / kOversample;
        double v = 0.0;
        for (const auto& w : waves) v += w.amp * std::cos(2 * M_PI * (w.kx * x + w.ky * y) / period + w.phase);
        z[static_cast<std::size_t>(j) * n + i] = v;
        mean += v;
      }
    }
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(z.size()));
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const double zz = (z[static_cast<std::size_t>(j) * n + i] - mean) / sd;
        tile->sample(i, j) = lo + (hi - lo) / (1.0 + std::exp(-gain * zz));
      }
    }
  };
  auto fill_constant = [&](double v) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) tile->sample(i, j) = v;
    }
  };
  auto random_point = [&] { return Point2{rng.uniform(0, period), rng.uniform(0, period)}; };

  switch (family) {
    case TextureFamily::Noise:
      fill_noise(24, 7, rng.uniform(2.0, 3.5));
      break;
    case TextureFamily::Shards: {
      fill_constant(lo + 0.1 * (hi - lo));
      const int count = 44 + static_cast<int>(rng.index(14));
      for (int s = 0; s < count; ++s) {
        const Point2 c = random_point();
        const int sides = 3 + static_cast<int>(rng.index(2));
        std::vector<Point2> ring;
        const double r = rng.uniform(12, 30);
        const double phase = rng.uniform(0, 2 * M_PI);
        for (int i = 0; i < sides; ++i) {
          const double a = phase + 2 * M_PI * (i + rng.uniform(-0.2, 0.2)) / sides;
          const double rr = r * rng.uniform(0.6, 1.0);
          ring.push_back({c.x + rr * std::cos(a), c.y + rr * std::sin(a)});
        }
        paint_wrapped(*tile, Shape{{ring}}, rng.uniform(lo, hi));
      }
      break;
    }
    case TextureFamily::Dots: {
      fill_noise(10, 3, 1.0);
      // Compress the background so the dots dominate the contrast.
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) tile->sample(i, j) = lo + 0.35 * (tile->sample(i, j) - lo);
      }
      const int count = 30 + static_cast<int>(rng.index(12));
      for (int s = 0; s < count; ++s) {
        const Point2 c = random_point();
        const double r = rng.uniform(4, 14);
        const int sides = rng.coin() ? 24 : 4 + static_cast<int>(rng.index(3));
        paint_wrapped(*tile, regular_polygon(c, r, sides, rng.uniform(0, M_PI)), rng.uniform(lo + 0.5 * (hi - lo), hi));
      }
      break;
    }
    case TextureFamily::Grating: {
      int kx = 0, ky = 0;
      while (std::hypot(kx, ky) < 3) {
        kx = static_cast<int>(rng.index(13)) - 6;
        ky = static_cast<int>(rng.index(13)) - 6;
      }
      const double phase = rng.uniform(0, 2 * M_PI);
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          const double x = static_cast<double>(i) / kOversample, y = static_cast<double>(j) / kOversample;
          const double v = std::cos(2 * M_PI * (kx * x + ky * y) / period + phase);
          tile->sample(i, j) = lo + (hi - lo) * 0.6 / (1.0 + std::exp(-3.0 * v));
        }
      }
      const int count = 12 + static_cast<int>(rng.index(8));
      for (int s = 0; s < count; ++s) {
        paint_wrapped(*tile, regular_polygon(random_point(), rng.uniform(6, 16), 4, rng.uniform(0, M_PI)),
                      rng.coin() ? hi : lo);
      }
      break;
    }
  }
  return tile;
}

// ---------------------------------------------------------------------------
// Screen layout

constexpr int kScreenW = 1008;
constexpr int kScreenH = 544;
constexpr int kBoxY = 40;
constexpr int kBoxSize = kPanelSize + 2;
constexpr int kBoxPitch = 242;
constexpr int kBoxX0 = 40;
constexpr std::array<int, 2> kSymChoiceX = {161, 645};
constexpr int kSymChoiceY = 302;

constexpr int kStripX = 104;
constexpr int kStripY = 40;
constexpr int kBlankInner = 100;
constexpr int kBlankOffset = (kPanelSize - kBlankInner) / 2;  // inner region offset in slice D
constexpr int kBlankGap = 4;
constexpr std::array<int, 2> kPerChoiceX = {253, 653};
constexpr int kPerChoiceY = 340;
constexpr int kChoiceFileMargin = 8;

void draw_frame(GrayImage& img, const Rect& r) {
  for (int x = r.x; x < r.right(); ++x) {
    img.at(x, r.y) = 255;
    img.at(x, r.bottom() - 1) = 255;
  }
  for (int y = r.y; y < r.bottom(); ++y) {
    img.at(r.x, y) = 255;
    img.at(r.right() - 1, y) = 255;
  }
}

void fill_rect(GrayImage& img, const Rect& r, std::uint8_t v) {
  for (int y = r.y; y < r.bottom(); ++y) {
    for (int x = r.x; x < r.right(); ++x) img.at(x, y) = v;
  }
}

TrialLayout layout_for(Modality m) {
  TrialLayout l;
  l.modality = m;
  if (m == Modality::Symbolic) {
    for (int k = 0; k < 3; ++k) l.windows[k] = {kBoxX0 + kBoxPitch * k + 1, kBoxY + 1, kPanelSize, kPanelSize};
    l.blank = {kBoxX0 + kBoxPitch * 3, kBoxY, kBoxSize, kBoxSize};
    for (int i = 0; i < 2; ++i) l.choices[i] = {kSymChoiceX[i], kSymChoiceY, kBoxSize, kBoxSize};
  } else {
    for (int k = 0; k < 3; ++k) l.windows[k] = {kStripX + kPanelSize * k, kStripY, kPanelSize, kPanelSize};
    const int dx = kStripX + kPanelSize * 3;
    l.blank = {dx + kBlankOffset - 1, kStripY + kBlankOffset - 1, kBlankInner + 2, kBlankInner + 2};
    for (int i = 0; i < 2; ++i) l.choices[i] = {kPerChoiceX[i], kPerChoiceY, kBlankInner + 2, kBlankInner + 2};
  }
  return l;
}

// Region of panel D shown inside the answer choices.
Rect answer_region(Modality m) {
  return m == Modality::Symbolic ? Rect{0, 0, kPanelSize, kPanelSize}
                                 : Rect{kBlankOffset, kBlankOffset, kBlankInner, kBlankInner};
}

GrayImage compose_screen(const TrialLayout& l, const std::array<GrayImage, 4>& panels,
                         const std::array<GrayImage, 2>& choice_content) {
  GrayImage screen(kScreenW, kScreenH);
  if (l.modality == Modality::Symbolic) {
    for (int k = 0; k < 3; ++k) {
      draw_frame(screen, inset(l.windows[k], -1));
      paste(screen, panels[k], l.windows[k].x, l.windows[k].y);
    }
    draw_frame(screen, l.blank);
  } else {
    for (int k = 0; k < 4; ++k) paste(screen, panels[k], kStripX + kPanelSize * k, kStripY);
    fill_rect(screen, inset(l.blank, -kBlankGap), 0);
    draw_frame(screen, l.blank);
  }
  for (int i = 0; i < 2; ++i) {
    draw_frame(screen, l.choices[i]);
    paste(screen, choice_content[i], l.choices[i].x + 1, l.choices[i].y + 1);
  }
  return screen;
}

// ---------------------------------------------------------------------------
// Trial content

struct BaseTrial {
  BaseSpec base;
  Rule rule;
  PanelState distractor;
};

const char* condition_prefix(Condition c) {
  switch (c) {
    case Condition::SymbolicMatching: return "SM";
    case Condition::SymbolicReasoning: return "SR";
    case Condition::PerceptualMatching: return "PM";
    case Condition::PerceptualReasoning: return "PR";
  }
  return "XX";
}

std::vector<RuleKind> reasoning_schedule(std::uint64_t seed, Condition c) {
  std::vector<RuleKind> kinds;
  auto add = [&](RuleKind k, int n) { kinds.insert(kinds.end(), n, k); };
  if (c == Condition::SymbolicReasoning) {
    add(RuleKind::RotateBy, 10);
    add(RuleKind::TranslateBy, 5);
    add(RuleKind::ScaleBy, 4);
    add(RuleKind::AddPart, 3);
    add(RuleKind::SubtractPart, 2);
  } else {
    add(RuleKind::RotateBy, 8);
    add(RuleKind::TranslateBy, 8);
    add(RuleKind::ScaleBy, 8);
  }
  Rng rng(derive_seed(seed, 7000 + static_cast<int>(c)));
  for (std::size_t i = kinds.size() - 1; i > 0; --i) std::swap(kinds[i], kinds[rng.index(i + 1)]);
  return kinds;
}

PanelState compose_state(const AffineTransform& extra, PanelState s) {
  s.transform = extra.after(s.transform);
  return s;
}

double answer_mse(const BaseSpec& base, Modality m, const PanelState& a, const PanelState& b) {
  const Rect r = answer_region(m);
  return mse(crop(render_panel(base, a), r), crop(render_panel(base, b), r));
}

bool glyph_fits(const BaseSpec& base, const PanelState& s) {
  try {
    check_glyph_bounds(base, s, kPanelSize);
    return true;
  } catch (const Error&) {
    return false;
  }
}

// Picks the first candidate distractor that differs clearly from the answer.
PanelState pick_distractor(const BaseSpec& base, Modality m, const PanelState& answer,
                           const std::vector<PanelState>& candidates) {
  double best = 0.0;
  for (const auto& c : candidates) {
    if (!glyph_fits(base, c)) continue;
    const double d = answer_mse(base, m, answer, c);
    if (d > 1000.0) return c;
    best = std::max(best, d);
  }
  throw Error(ErrorCode::OutOfBoundsRule,
              "no distractor differs enough from the answer (best mse " + std::to_string(best) + ")");
}

BaseTrial make_symbolic(std::uint64_t seed, Condition cond, int b, Rng& rng) {
  const Point2 c = panel_center(kPanelSize);
  BaseTrial t;
  if (cond == Condition::SymbolicMatching) {
    t.rule.kind = RuleKind::Identity;
    if (b % 6 == 5) {
      t.base = hexagram_glyph(c, 80, 1 + static_cast<int>(rng.index(5)));
    } else {
      t.base = GlyphSpec{random_glyph(rng, c, rng.uniform(40, 55)), {}, 0};
    }
  } else {
    const RuleKind kind = reasoning_schedule(seed, cond)[b];
    t.rule.kind = kind;
    switch (kind) {
      case RuleKind::RotateBy: {
        static constexpr double kAngles[] = {30, 45, 60, 90};
        t.rule.angle_deg = kAngles[b % 4] * (rng.coin() ? 1 : -1);
        t.base = GlyphSpec{random_glyph(rng, c, rng.uniform(44, 56)), {}, 0};
        break;
      }
      case RuleKind::TranslateBy: {
        const double mag = rng.uniform(14, 22);
        const double dir = deg2rad(45.0 * static_cast<double>(rng.index(8)));
        t.rule.dx = std::round(mag * std::cos(dir)) + 0.0;
        t.rule.dy = std::round(mag * std::sin(dir)) + 0.0;
        const Point2 start{c.x - 1.5 * t.rule.dx, c.y - 1.5 * t.rule.dy};
        t.base = GlyphSpec{random_glyph(rng, start, rng.uniform(28, 34)), {}, 0};
        break;
      }
      case RuleKind::ScaleBy: {
        static constexpr double kFactors[] = {1.2, 0.8, 1.25, 0.75};
        t.rule.factor = kFactors[b % 4];
        const double r0 = t.rule.factor > 1 ? 88.0 / (1.65 * std::pow(t.rule.factor, 3)) : 54.0;
        t.base = GlyphSpec{random_glyph(rng, c, r0), {}, 0};
        break;
      }
      case RuleKind::AddPart: {
        const int slots = rng.coin() ? 6 : 5;
        t.rule.angle_deg = 360.0 / slots;
        t.rule.part = 1;
        t.base = b % 2 == 0 ? hexagram_glyph(c, 80, 1) : petal_glyph(rng, c, slots, 1);
        if (std::holds_alternative<GlyphSpec>(t.base) && std::get<GlyphSpec>(t.base).parts.size() == 6) {
          t.rule.angle_deg = 60.0;
        }
        break;
      }
      case RuleKind::SubtractPart: {
        const int slots = rng.coin() ? 6 : 5;
        t.base = b % 2 == 0 ? hexagram_glyph(c, 80, 6) : petal_glyph(rng, c, slots, slots);
        const int n = static_cast<int>(std::get<GlyphSpec>(t.base).parts.size());
        t.rule.angle_deg = 360.0 / n;
        t.rule.part = 0;
        break;
      }
      case RuleKind::Identity: break;
    }
  }

  const Modality m = Modality::Symbolic;
  const PanelState answer = rule_state(t.base, t.rule, 3);
  std::vector<PanelState> cands;
  switch (t.rule.kind) {
    case RuleKind::Identity:
      for (double a : {90.0, 180.0, 45.0, 135.0}) {
        cands.push_back(compose_state(AffineTransform::rotation(deg2rad(a), c), answer));
      }
      break;
    case RuleKind::RotateBy: {
      const PanelState before = rule_state(t.base, t.rule, 2);
      const double th = t.rule.angle_deg;
      for (double wrong : {-th, 2 * th, th / 2, 3 * th}) {
        cands.push_back(compose_state(AffineTransform::rotation(deg2rad(wrong), c), before));
      }
      break;
    }
    case RuleKind::TranslateBy: {
      const PanelState before = rule_state(t.base, t.rule, 2);
      const double dx = t.rule.dx, dy = t.rule.dy;
      for (auto [wx, wy] : {std::pair{-dx, -dy}, std::pair{-dy, dx}, std::pair{dy, -dx}, std::pair{0.0, 0.0}}) {
        cands.push_back(compose_state(AffineTransform::translation(wx, wy), before));
      }
      break;
    }
    case RuleKind::ScaleBy: {
      const PanelState before = rule_state(t.base, t.rule, 2);
      const double f = t.rule.factor;
      for (double wrong : {1.0 / f, f * f, 1.0}) {
        cands.push_back(compose_state(AffineTransform::scaling(wrong, c), before));
      }
      break;
    }
    case RuleKind::AddPart: {
      // Wrong slot: skip the next part and add the one after it.
      PanelState s = rule_state(t.base, t.rule, 2);
      const int n = static_cast<int>(std::get<GlyphSpec>(t.base).parts.size());
      for (int slot = answer.parts.back() + 1; slot < n; ++slot) {
        PanelState w = s;
        w.parts.push_back(slot);
        cands.push_back(w);
      }
      break;
    }
    case RuleKind::SubtractPart: {
      // Wrong part removed: the last one instead of the next one.
      const PanelState s = rule_state(t.base, t.rule, 2);
      for (int drop = static_cast<int>(s.parts.size()) - 1; drop > 0; --drop) {
        PanelState w = s;
        w.parts.erase(w.parts.begin() + drop);
        cands.push_back(w);
      }
      break;
    }
  }
  t.distractor = pick_distractor(t.base, m, answer, cands);
  return t;
}

BaseTrial make_perceptual(std::uint64_t seed, Condition cond, int b, Rng& rng) {
  const Point2 c = panel_center(kPanelSize);
  BaseTrial t;
  const auto family = static_cast<TextureFamily>(b % 4);
  const int lo = 48 + static_cast<int>(rng.index(24));
  const int hi = std::min(255, lo + 130 + static_cast<int>(rng.index(70)));
  t.base = TextureSpec{make_texture(rng, family, lo, hi), {rng.uniform(0, kPanelSize), rng.uniform(0, kPanelSize)}};

  std::vector<AffineTransform> wrong_steps;
  if (cond == Condition::PerceptualMatching) {
    t.rule.kind = RuleKind::Identity;
    for (int i = 0; i < 4; ++i) {
      const double sx = rng.uniform(18, 36) * (rng.coin() ? 1 : -1);
      const double sy = rng.uniform(18, 36) * (rng.coin() ? 1 : -1);
      wrong_steps.push_back(AffineTransform::translation(sx, sy));
    }
    wrong_steps.push_back(AffineTransform::rotation(deg2rad(90), c));
  } else {
    const RuleKind kind = reasoning_schedule(seed, cond)[b];
    t.rule.kind = kind;
    switch (kind) {
      case RuleKind::RotateBy: {
        static constexpr double kAngles[] = {30, 45, 60, 90};
        const double th = kAngles[(b / 4) % 4] * (rng.coin() ? 1 : -1);
        t.rule.angle_deg = th;
        for (double w : {-th, 2 * th, th / 2}) wrong_steps.push_back(AffineTransform::rotation(deg2rad(w), c));
        break;
      }
      case RuleKind::TranslateBy: {
        const double mag = rng.uniform(12, 24);
        const double dir = rng.uniform(0, 2 * M_PI);
        t.rule.dx = std::round(mag * std::cos(dir)) + 0.0;
        t.rule.dy = std::round(mag * std::sin(dir)) + 0.0;
        const double dx = t.rule.dx, dy = t.rule.dy;
        for (auto [wx, wy] : {std::pair{-dx, -dy}, std::pair{-dy, dx}, std::pair{2 * dx, 2 * dy}}) {
          wrong_steps.push_back(AffineTransform::translation(wx, wy));
        }
        break;
      }
      case RuleKind::ScaleBy: {
        static constexpr double kFactors[] = {1.2, 0.8, 1.15, 0.85};
        const double f = kFactors[(b / 4) % 4];
        t.rule.factor = f;
        for (double w : {1.0 / f, f * f}) wrong_steps.push_back(AffineTransform::scaling(w, c));
        break;
      }
      default: break;
    }
  }
  // Coarser wrong steps for smooth textures where near misses look alike.
  wrong_steps.push_back(AffineTransform::rotation(deg2rad(180), c));
  wrong_steps.push_back(AffineTransform::translation(47, -41));
  const PanelState answer = rule_state(t.base, t.rule, 3);
  const PanelState before = rule_state(t.base, t.rule, 2);
  std::vector<PanelState> cands;
  for (const auto& w : wrong_steps) cands.push_back(compose_state(w, before));
  t.distractor = pick_distractor(t.base, Modality::Perceptual, answer, cands);
  return t;
}

}  // namespace

namespace {

BaseTrial draw_base(std::uint64_t seed, Condition cond, int base_index, Rng& rng) {
  const Modality m = modality_of(cond);
  // A redraw from the same stream replaces content without a usable distractor.
  constexpr int kAttempts = 8;
  for (int attempt = 0;; ++attempt) {
    try {
      return m == Modality::Symbolic ? make_symbolic(seed, cond, base_index, rng)
                                     : make_perceptual(seed, cond, base_index, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OutOfBoundsRule || attempt + 1 == kAttempts) throw;
    }
  }
}

void check_trial_index(int base_index, int presentation) {
  if (base_index < 0 || base_index >= kBasesPerCondition || presentation < 0 || presentation >= kPresentations) {
    throw Error(ErrorCode::InvalidArgument, "trial index out of range");
  }
}

Rng trial_rng(std::uint64_t seed, Condition cond, int base_index) {
  return Rng(derive_seed(seed, 1000 * (static_cast<int>(cond) + 1) + base_index));
}

}  // namespace

std::vector<GrayImage> render_trial_series(std::uint64_t seed, Condition cond, int base_index,
                                           int presentation, int n) {
  check_trial_index(base_index, presentation);
  Rng rng = trial_rng(seed, cond, base_index);
  const BaseTrial bt = draw_base(seed, cond, base_index, rng);
  auto series = render_rule_series(bt.base, bt.rule, n);
  if (presentation >= 2) {
    for (auto& p : series) p = flip_horizontal(p);
  }
  return series;
}

Trial generate_trial(std::uint64_t seed, Condition cond, int base_index, int presentation) {
  check_trial_index(base_index, presentation);
  Rng rng = trial_rng(seed, cond, base_index);
  const Modality m = modality_of(cond);
  const BaseTrial bt = draw_base(seed, cond, base_index, rng);
  const int first_correct = static_cast<int>(rng.index(2));

  Trial trial;
  const auto series = render_rule_series(bt.base, bt.rule, 4);
  GrayImage distractor = render_panel(bt.base, bt.distractor);
  const bool mirrored = presentation >= 2;
  for (int k = 0; k < 4; ++k) trial.panels[k] = mirrored ? flip_horizontal(series[k]) : series[k];
  trial.distractor_panel = mirrored ? flip_horizontal(distractor) : distractor;

  const int correct = presentation % 2 == 0 ? first_correct : 1 - first_correct;
  const Rect region = answer_region(m);
  std::array<GrayImage, 2> content;
  content[correct] = crop(trial.panels[3], region);
  content[1 - correct] = crop(trial.distractor_panel, region);

  const TrialLayout layout = layout_for(m);
  trial.cue_screen = compose_screen(layout, trial.panels, content);
  for (int i = 0; i < 2; ++i) trial.choices[i] = crop(trial.cue_screen, layout.choices[i]);

  static constexpr const char* kPresentation[] = {"n0", "n1", "m0", "m1"};
  char id[32];
  std::snprintf(id, sizeof id, "%s_%02d_%s", condition_prefix(cond), base_index, kPresentation[presentation]);
  TrialMeta& meta = trial.meta;
  meta.id = id;
  meta.condition = cond;
  meta.rule = bt.rule;
  if (mirrored) {
    // Reflection about the vertical axis conjugates the rule.
    meta.rule.angle_deg = 0.0 - meta.rule.angle_deg;
    meta.rule.dx = 0.0 - meta.rule.dx;
  }
  meta.correct = correct;
  meta.mirrored = mirrored;
  meta.cue_path = "trials/" + meta.id + "_cue.png";
  meta.choice_paths = {"trials/" + meta.id + "_choice0.png", "trials/" + meta.id + "_choice1.png"};
  meta.layout = layout;
  meta.base_index = base_index;
  return trial;
}

std::array<int, 4> TrialManifest::counts() const {
  std::array<int, 4> c{};
  for (const auto& t : trials) ++c[static_cast<int>(t.condition)];
  return c;
}

const TrialMeta& TrialManifest::find(const std::string& id) const {
  for (const auto& t : trials) {
    if (t.id == id) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "no trial with id '" + id + "'");
}

namespace {

json rect_json(const Rect& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }
Rect rect_from(const json& j) { return {j.at("x"), j.at("y"), j.at("w"), j.at("h")}; }

json rule_json(const Rule& r) {
  json params = json::object();
  switch (r.kind) {
    case RuleKind::RotateBy: params["angle_deg"] = r.angle_deg; break;
    case RuleKind::TranslateBy: params["dx"] = r.dx; params["dy"] = r.dy; break;
    case RuleKind::ScaleBy: params["factor"] = r.factor; break;
    case RuleKind::AddPart:
    case RuleKind::SubtractPart: params["part"] = r.part; params["slot_angle_deg"] = r.angle_deg; break;
    case RuleKind::Identity: break;
  }
  return {{"kind", to_string(r.kind)}, {"params", params}};
}

Rule rule_from(const json& j) {
  Rule r;
  r.kind = rule_kind_from_string(j.at("kind"));
  const json& p = j.at("params");
  r.angle_deg = p.value("angle_deg", p.value("slot_angle_deg", 0.0));
  r.dx = p.value("dx", 0.0);
  r.dy = p.value("dy", 0.0);
  r.factor = p.value("factor", 1.0);
  r.part = p.value("part", 0);
  return r;
}

}  // namespace

void save_manifest(const TrialManifest& m, const std::filesystem::path& path) {
  json trials = json::array();
  for (const auto& t : m.trials) {
    json layout = {{"windows", {rect_json(t.layout.windows[0]), rect_json(t.layout.windows[1]),
                                rect_json(t.layout.windows[2])}},
                   {"blank", rect_json(t.layout.blank)},
                   {"choices", {rect_json(t.layout.choices[0]), rect_json(t.layout.choices[1])}}};
    trials.push_back({{"id", t.id},
                      {"condition", to_string(t.condition)},
                      {"rule", rule_json(t.rule)},
                      {"correct", t.correct},
                      {"mirrored", t.mirrored},
                      {"base_index", t.base_index},
                      {"cue_path", t.cue_path},
                      {"choice_paths", {t.choice_paths[0], t.choice_paths[1]}},
                      {"layout", layout}});
  }
  const auto counts = m.counts();
  json count_obj = json::object();
  for (Condition c : kAllConditions) count_obj[to_string(c)] = counts[static_cast<int>(c)];
  const json doc = {{"dataset_seed", m.dataset_seed}, {"counts", count_obj}, {"trials", trials}};

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << doc.dump(1) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move manifest into place: " + ec.message());
}

TrialManifest load_manifest(const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed manifest: " + std::string(e.what()));
  }
  TrialManifest m;
  try {
    m.dataset_seed = doc.at("dataset_seed").get<std::uint64_t>();
    for (const auto& j : doc.at("trials")) {
      TrialMeta t;
      t.id = j.at("id");
      t.condition = condition_from_string(j.at("condition"));
      t.rule = rule_from(j.at("rule"));
      t.correct = j.at("correct");
      t.mirrored = j.at("mirrored");
      t.base_index = j.at("base_index");
      t.cue_path = j.at("cue_path");
      t.choice_paths = {j.at("choice_paths").at(0), j.at("choice_paths").at(1)};
      const json& l = j.at("layout");
      t.layout.modality = modality_of(t.condition);
      for (int k = 0; k < 3; ++k) t.layout.windows[k] = rect_from(l.at("windows").at(k));
      t.layout.blank = rect_from(l.at("blank"));
      for (int k = 0; k < 2; ++k) t.layout.choices[k] = rect_from(l.at("choices").at(k));
      m.trials.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "manifest schema error: " + std::string(e.what()));
  }
  return m;
}

TrialManifest generate_dataset(std::uint64_t seed, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "trials", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  struct Job {
    Condition cond;
    int base;
    int presentation;
  };
  std::vector<Job> jobs;
  for (Condition c : kAllConditions) {
    for (int b = 0; b < kBasesPerCondition; ++b) {
      for (int p = 0; p < kPresentations; ++p) jobs.push_back({c, b, p});
    }
  }
  // Conditions interleave trial by trial.
  Rng order(derive_seed(seed, 424242));
  for (std::size_t i = jobs.size() - 1; i > 0; --i) std::swap(jobs[i], jobs[order.index(i + 1)]);

  std::vector<TrialMeta> metas(jobs.size());
  std::vector<std::string> errors(jobs.size());
  const long n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      const Trial t = generate_trial(seed, jobs[i].cond, jobs[i].base, jobs[i].presentation);
      save_png(t.cue_screen, out_dir / t.meta.cue_path);
      for (int k = 0; k < 2; ++k) {
        const Rect r = inset(t.meta.layout.choices[k], -kChoiceFileMargin);
        save_png(crop(t.cue_screen, r), out_dir / t.meta.choice_paths[k]);
      }
      metas[i] = t.meta;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::IoError, "dataset generation failed: " + e);
  }

  TrialManifest m;
  m.dataset_seed = seed;
  m.trials = std::move(metas);
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace mr
