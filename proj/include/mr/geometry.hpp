#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mr/affine.hpp"
#include "mr/features.hpp"
#include "mr/rng.hpp"

namespace mr {

struct PointPair {
  Point2 src;
  Point2 dst;
};

PointPair to_point_pair(const MatchPair& m);

/// Unique affine map taking three source points exactly onto their
/// destinations. Throws DegenerateTriple when the source triangle area is
/// <= 1e-6 px^2.
AffineTransform fit_exact(const PointPair& p1, const PointPair& p2, const PointPair& p3);

/// Least-squares affine fit, sum ||T(src) - dst||^2, via centred normal
/// equations and partial-pivot elimination. Throws TooFewMatches below three
/// pairs and DegenerateConfiguration for a rank-deficient system.
AffineTransform fit_lsq(std::span<const PointPair> pairs);
AffineTransform fit_lsq(std::span<const MatchPair> matches);

double reprojection_error(const AffineTransform& t, const PointPair& p);

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold_px = 3.0;
  int min_inliers = 4;
  int max_rounds = 6;
};

/// Inlier set I and outlier set O of one consensus fit. Index lists refer to
/// positions in the match list handed to ransac() / decompose().
struct RansacResult {
  AffineTransform transform;
  std::vector<MatchPair> inliers;
  std::vector<MatchPair> outliers;
  std::vector<std::size_t> inlier_index;
  std::vector<std::size_t> outlier_index;
  double inlier_rmse = 0.0;
};

/// Plain RANSAC over minimal 3-samples, largest consensus wins, winner refit by
/// least squares on its inliers, input partitioned by the refit transform.
/// Throws TooFewMatches (< 3) and NoConsensus (best consensus < min_inliers).
RansacResult ransac(std::span<const MatchPair> matches, const RansacConfig& cfg, Rng& rng);

/// Local score used to pick among repeated candidates of one round; lower wins.
using CandidateScore = std::function<double(const AffineTransform&)>;

struct Decomposition {
  std::vector<RansacResult> rounds;
  std::vector<std::size_t> residual_index;  // outliers left when iteration stopped
};

/// Sequential multi-model fit. Round one is RANSAC on all matches. Each later
/// round samples three inliers of the previous round and reruns RANSAC on the
/// remaining outliers plus those three; the injected points are dropped from
/// the new outlier set. Stops when fewer than three outliers remain, after
/// cfg.max_rounds results, or on NoConsensus.
///
/// With `repeats` > 1 every round is attempted that many times and the
/// candidate with the lowest `score` is kept (first one on ties).
Decomposition decompose(std::span<const MatchPair> matches, const RansacConfig& cfg, Rng& rng,
                        int repeats = 1, const CandidateScore& score = {});

}  // namespace mr
