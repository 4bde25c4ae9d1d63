#include "mr/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mr/error.hpp"

namespace mr {

PointPair to_point_pair(const MatchPair& m) {
  return {{m.src.x, m.src.y}, {m.dst.x, m.dst.y}};
}

AffineTransform fit_exact(const PointPair& p1, const PointPair& p2, const PointPair& p3) {
  const double ux = p2.src.x - p1.src.x, uy = p2.src.y - p1.src.y;
  const double vx = p3.src.x - p1.src.x, vy = p3.src.y - p1.src.y;
  const double cross = ux * vy - uy * vx;
  if (!(0.5 * std::abs(cross) > 1e-6)) {
    throw Error(ErrorCode::DegenerateTriple, "source points are collinear or coincident");
  }
  // Linear part from the two edge vectors, translation from p1.
  const double dux = p2.dst.x - p1.dst.x, duy = p2.dst.y - p1.dst.y;
  const double dvx = p3.dst.x - p1.dst.x, dvy = p3.dst.y - p1.dst.y;
  AffineTransform t;
  t.a = (dux * vy - dvx * uy) / cross;
  t.b = (dvx * ux - dux * vx) / cross;
  t.c = (duy * vy - dvy * uy) / cross;
  t.d = (dvy * ux - duy * vx) / cross;
  t.tx = p1.dst.x - t.a * p1.src.x - t.b * p1.src.y;
  t.ty = p1.dst.y - t.c * p1.src.x - t.d * p1.src.y;
  return t;
}

namespace {

// Solves the 3x3 system m * x = rhs (two right-hand sides) with partial
// pivoting. Returns false when a pivot vanishes relative to the matrix scale.
bool solve3(std::array<std::array<double, 3>, 3> m, std::array<std::array<double, 2>, 3> rhs,
            std::array<std::array<double, 2>, 3>& x) {
  double scale = 0.0;
  for (const auto& r : m) {
    for (double v : r) scale = std::max(scale, std::abs(v));
  }
  if (scale == 0.0) return false;
  const double tiny = scale * 1e-12;
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (std::abs(m[piv][col]) <= tiny) return false;
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 3; ++c) m[r][c] -= f * m[col][c];
      for (int k = 0; k < 2; ++k) rhs[r][k] -= f * rhs[col][k];
    }
  }
  for (int row = 2; row >= 0; --row) {
    for (int k = 0; k < 2; ++k) {
      double acc = rhs[row][k];
      for (int c = row + 1; c < 3; ++c) acc -= m[row][c] * x[c][k];
      x[row][k] = acc / m[row][row];
    }
  }
  return true;
}

}  // namespace

AffineTransform fit_lsq(std::span<const PointPair> pairs) {
  if (pairs.size() < 3) {
    throw Error(ErrorCode::TooFewMatches, "least-squares fit needs at least 3 correspondences");
  }
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += p.src.x;
    my += p.src.y;
  }
  mx /= n;
  my /= n;

  // Normal equations in centred source coordinates (u, v, 1).
  std::array<std::array<double, 3>, 3> ata{};
  std::array<std::array<double, 2>, 3> atb{};
  for (const auto& p : pairs) {
    const double row[3] = {p.src.x - mx, p.src.y - my, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) ata[i][j] += row[i] * row[j];
      atb[i][0] += row[i] * p.dst.x;
      atb[i][1] += row[i] * p.dst.y;
    }
  }
  std::array<std::array<double, 2>, 3> sol{};
  if (!solve3(ata, atb, sol)) {
    throw Error(ErrorCode::DegenerateConfiguration, "normal matrix is rank deficient");
  }
  AffineTransform t;
  t.a = sol[0][0];
  t.b = sol[1][0];
  t.c = sol[0][1];
  t.d = sol[1][1];
  t.tx = sol[2][0] - t.a * mx - t.b * my;
  t.ty = sol[2][1] - t.c * mx - t.d * my;
  return t;
}

AffineTransform fit_lsq(std::span<const MatchPair> matches) {
  std::vector<PointPair> pairs;
  pairs.reserve(matches.size());
  for (const auto& m : matches) pairs.push_back(to_point_pair(m));
  return fit_lsq(pairs);
}

double reprojection_error(const AffineTransform& t, const PointPair& p) {
  const Point2 q = t.apply(p.src);
  return std::hypot(q.x - p.dst.x, q.y - p.dst.y);
}

namespace {

struct IndexFit {
  AffineTransform transform;
  std::vector<std::size_t> inliers;   // positions in the subset
  std::vector<std::size_t> outliers;
  double rmse = 0.0;
};

void partition(const AffineTransform& t, std::span<const PointPair> pts, double thr,
               IndexFit& out) {
  out.inliers.clear();
  out.outliers.clear();
  double sq = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double e = reprojection_error(t, pts[i]);
    if (e <= thr) {
      out.inliers.push_back(i);
      sq += e * e;
    } else {
      out.outliers.push_back(i);
    }
  }
  out.transform = t;
  out.rmse = out.inliers.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(out.inliers.size()));
}

IndexFit ransac_points(std::span<const PointPair> pts, const RansacConfig& cfg, Rng& rng) {
  const std::size_t n = pts.size();
  if (n < 3) throw Error(ErrorCode::TooFewMatches, "RANSAC needs at least 3 matches");
  const double thr2 = cfg.inlier_threshold_px * cfg.inlier_threshold_px;

  std::size_t best_count = 0;
  AffineTransform best;
  int accepted = 0;
  const long max_draws = 20L * std::max(cfg.iterations, 1);
  for (long draw = 0; draw < max_draws && accepted < cfg.iterations; ++draw) {
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    std::size_t k = rng.index(n - 2);
    if (k >= std::min(i, j)) ++k;
    if (k >= std::max(i, j)) ++k;

    AffineTransform t;
    try {
      t = fit_exact(pts[i], pts[j], pts[k]);
    } catch (const Error&) {
      continue;  // degenerate sample: draw again
    }
    ++accepted;

    std::size_t count = 0;
    for (const auto& p : pts) {
      const Point2 q = t.apply(p.src);
      const double dx = q.x - p.dst.x, dy = q.y - p.dst.y;
      count += dx * dx + dy * dy <= thr2;
    }
    if (count > best_count) {
      best_count = count;
      best = t;
    }
  }
  if (best_count < static_cast<std::size_t>(std::max(cfg.min_inliers, 3))) {
    throw Error(ErrorCode::NoConsensus, "best consensus " + std::to_string(best_count) +
                                            " below minimum " + std::to_string(cfg.min_inliers));
  }

  IndexFit minimal;
  partition(best, pts, cfg.inlier_threshold_px, minimal);

  std::vector<PointPair> inlier_pts;
  inlier_pts.reserve(minimal.inliers.size());
  for (std::size_t i : minimal.inliers) inlier_pts.push_back(pts[i]);
  try {
    IndexFit refit;
    partition(fit_lsq(inlier_pts), pts, cfg.inlier_threshold_px, refit);
    // Keep the refit unless it loses support.
    if (refit.inliers.size() >= minimal.inliers.size()) return refit;
  } catch (const Error&) {
  }
  return minimal;
}

std::vector<PointPair> to_points(std::span<const MatchPair> matches) {
  std::vector<PointPair> pts;
  pts.reserve(matches.size());
  for (const auto& m : matches) pts.push_back(to_point_pair(m));
  return pts;
}

// Lifts subset-relative indices to indices into the full match list.
RansacResult materialize(const IndexFit& fit, std::span<const MatchPair> matches,
                         std::span<const std::size_t> subset) {
  RansacResult r;
  r.transform = fit.transform;
  r.inlier_rmse = fit.rmse;
  for (std::size_t i : fit.inliers) {
    r.inlier_index.push_back(subset[i]);
    r.inliers.push_back(matches[subset[i]]);
  }
  for (std::size_t i : fit.outliers) {
    r.outlier_index.push_back(subset[i]);
    r.outliers.push_back(matches[subset[i]]);
  }
  return r;
}

}  // namespace

RansacResult ransac(std::span<const MatchPair> matches, const RansacConfig& cfg, Rng& rng) {
  const auto pts = to_points(matches);
  const IndexFit fit = ransac_points(pts, cfg, rng);
  std::vector<std::size_t> all(matches.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return materialize(fit, matches, all);
}

Decomposition decompose(std::span<const MatchPair> matches, const RansacConfig& cfg, Rng& rng,
                        int repeats, const CandidateScore& score) {
  if (matches.size() < 3) throw Error(ErrorCode::TooFewMatches, "decompose needs at least 3 matches");
  repeats = std::max(repeats, 1);
  const auto pts = to_points(matches);

  // Runs one round `repeats` times on subsets produced by `make_subset` and
  // keeps the lowest-scoring candidate. Returns false if every attempt failed.
  auto run_round = [&](auto&& make_subset, RansacResult& chosen,
                       std::vector<std::size_t>& chosen_injected) {
    bool found = false;
    double best_score = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < repeats; ++rep) {
      std::vector<std::size_t> injected;
      const std::vector<std::size_t> subset = make_subset(injected);
      std::vector<PointPair> sub_pts;
      sub_pts.reserve(subset.size());
      for (std::size_t i : subset) sub_pts.push_back(pts[i]);
      IndexFit fit;
      try {
        fit = ransac_points(sub_pts, cfg, rng);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NoConsensus) continue;
        throw;
      }
      const double s = score ? score(fit.transform) : 0.0;
      if (!found || s < best_score) {
        found = true;
        best_score = s;
        chosen = materialize(fit, matches, subset);
        chosen_injected = std::move(injected);
      }
    }
    return found;
  };

  Decomposition out;
  {
    RansacResult first;
    std::vector<std::size_t> none;
    auto all_subset = [&](std::vector<std::size_t>&) {
      std::vector<std::size_t> all(matches.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return all;
    };
    if (!run_round(all_subset, first, none)) {
      throw Error(ErrorCode::NoConsensus, "no transform reaches the minimum consensus");
    }
    out.residual_index = first.outlier_index;
    out.rounds.push_back(std::move(first));
  }

  while (out.residual_index.size() >= 3 &&
         static_cast<int>(out.rounds.size()) < cfg.max_rounds) {
    const std::vector<std::size_t> prev_inliers = out.rounds.back().inlier_index;
    const std::vector<std::size_t> outliers = out.residual_index;
    auto residual_subset = [&](std::vector<std::size_t>& injected) {
      // Three distinct previous inliers, drawn without replacement.
      std::vector<std::size_t> pool = prev_inliers;
      for (int k = 0; k < 3 && !pool.empty(); ++k) {
        const std::size_t pick = rng.index(pool.size());
        injected.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<long>(pick));
      }
      std::vector<std::size_t> subset = outliers;
      subset.insert(subset.end(), injected.begin(), injected.end());
      return subset;
    };
    RansacResult next;
    std::vector<std::size_t> injected;
    if (!run_round(residual_subset, next, injected)) break;

    std::vector<std::size_t> remaining;
    for (std::size_t i : next.outlier_index) {
      if (std::find(injected.begin(), injected.end(), i) == injected.end()) remaining.push_back(i);
    }
    out.residual_index = std::move(remaining);
    out.rounds.push_back(std::move(next));
  }
  return out;
}

}  // namespace mr
