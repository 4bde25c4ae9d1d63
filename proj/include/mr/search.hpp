#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mr/attention.hpp"
#include "mr/features.hpp"
#include "mr/geometry.hpp"
#include "mr/kernels.hpp"

namespace mr {

struct OperationStep {
  AffineTransform transform;
  int threshold = 128;
  RoundingDirection dir = RoundingDirection::Up;
};

/// The expressed rule: ordered warp + threshold-combine steps.
struct OperationSequence {
  std::vector<OperationStep> steps;
  double global_mse = 0.0;
};

struct SearchConfig {
  /// One third, one half and two thirds of 255, rounded.
  std::vector<int> threshold_values{85, 128, 170};
  int local_repeats = 10;
  int global_threads = 3;
  std::uint64_t seed = 0;
  RansacConfig ransac{};
  DetectorConfig detector{};
};

/// Per-run bookkeeping of derive_sequence.
struct SearchTrace {
  std::size_t features_a = 0;
  std::size_t features_b = 0;
  std::size_t matches = 0;         // ratio-test survivors A -> B
  std::vector<double> thread_mse;  // global MSE of every thread, in thread order
  std::vector<OperationSequence> thread_sequences;
  int winner = -1;
};

/// Derives an operation sequence from cues A -> B, scoring candidate steps by
/// how well they carry B onto C. Every decomposition round becomes a step.
/// Runs cfg.global_threads independent restarts and returns the one with the
/// lowest global MSE (lowest index on ties).
/// Throws NoFeatures, TooFewMatches or NoConsensus.
OperationSequence derive_sequence(const GrayImage& cue_a, const GrayImage& cue_b,
                                  const GrayImage& cue_c, const SearchConfig& cfg,
                                  SearchTrace* trace = nullptr);

/// Warps `input` by every step and threshold-combines into an accumulator that
/// starts at zero. Output is binary and has the input's dimensions.
GrayImage apply_sequence(const GrayImage& input, const OperationSequence& seq);

struct Prediction {
  GrayImage full;     // predicted panel D
  GrayImage cropped;  // blank-sized region of `full`
  int chosen = 0;
  double margin = 0.0;  // mse(other) - mse(chosen)
  std::array<double, 2> choice_mse{};
  bool tie = false;
};

/// Cue windows A, B, C cut from the screen.
std::array<GrayImage, 3> extract_windows(const TrialLayout& layout, const GrayImage& screen);
/// Choice rectangles (border included) cut from the screen.
std::array<GrayImage, 2> extract_choices(const TrialLayout& layout, const GrayImage& screen);

/// Applies `seq` to cue C, crops the blank-aligned region and picks the
/// choice whose interior has the lower MSE. Ties (|dMSE| < 1e-9) go to 0.
Prediction predict_and_choose(const TrialLayout& layout, const GrayImage& screen,
                              const OperationSequence& seq,
                              const std::array<GrayImage, 2>& choices);

/// Forced choice between two candidate interiors given a cropped prediction.
Prediction choose(GrayImage full, GrayImage cropped, const GrayImage& choice0,
                  const GrayImage& choice1);

/// out[0] = apply(start), out[k] = apply(out[k-1]).
std::vector<GrayImage> extrapolate(const GrayImage& start, const OperationSequence& seq, int n_steps);

}  // namespace mr
