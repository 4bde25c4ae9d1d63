#include "mr/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mr/error.hpp"
#include "mr/rng.hpp"

namespace mr {

namespace {

void check_config(const SearchConfig& cfg) {
  if (cfg.local_repeats < 1 || cfg.global_threads < 1 || cfg.threshold_values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "search config needs repeats, threads and thresholds");
  }
  for (int t : cfg.threshold_values) {
    if (t <= 0 || t >= 255) throw Error(ErrorCode::InvalidArgument, "thresholds must lie in (0,255)");
  }
}

OperationSequence run_thread(const std::vector<MatchPair>& matches, const GrayImage& cue_b,
                             const GrayImage& cue_c, const SearchConfig& cfg, int thread) {
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(thread)));
  const int w = cue_b.width();
  const int h = cue_b.height();

  // Local similarity: B carried by the candidate against C.
  auto local_mse = [&](const AffineTransform& t) {
    if (!t.finite() || !t.inverse()) return std::numeric_limits<double>::infinity();
    return mse(warp_affine(cue_b, t, w, h), cue_c);
  };
  const Decomposition dec = decompose(matches, cfg.ransac, rng, cfg.local_repeats, local_mse);

  OperationSequence seq;
  for (const auto& round : dec.rounds) {
    OperationStep step;
    step.transform = round.transform;
    step.threshold = cfg.threshold_values[rng.index(cfg.threshold_values.size())];
    step.dir = rng.coin() ? RoundingDirection::Up : RoundingDirection::Down;
    if (!step.transform.finite() || !step.transform.inverse()) continue;
    seq.steps.push_back(step);
  }
  if (seq.steps.empty()) throw Error(ErrorCode::NoConsensus, "no invertible transform found");
  seq.global_mse = mse(apply_sequence(cue_b, seq), cue_c);
  return seq;
}

}  // namespace

OperationSequence derive_sequence(const GrayImage& cue_a, const GrayImage& cue_b,
                                  const GrayImage& cue_c, const SearchConfig& cfg,
                                  SearchTrace* trace) {
  check_config(cfg);
  if (!cue_a.same_shape(cue_b) || !cue_a.same_shape(cue_c)) {
    throw Error(ErrorCode::DimensionMismatch, "cue windows differ in size");
  }
  const auto fa = detect(cue_a, cfg.detector);
  const auto fb = detect(cue_b, cfg.detector);
  if (trace) {
    trace->features_a = fa.size();
    trace->features_b = fb.size();
  }
  if (fa.empty() || fb.empty()) {
    throw Error(ErrorCode::NoFeatures, "no features in cue " + std::string(fa.empty() ? "A" : "B"));
  }
  const auto matches = match(fa, fb);
  if (trace) trace->matches = matches.size();
  if (matches.size() < 3) {
    throw Error(ErrorCode::TooFewMatches,
                "only " + std::to_string(matches.size()) + " matches between cues A and B");
  }

  const int n = cfg.global_threads;
  std::vector<OperationSequence> results(n);
  std::vector<int> failed(n, 0);
  std::vector<std::string> messages(n);
  // Threads own their rng streams; the winner depends only on (mse, index).
#pragma omp parallel for schedule(dynamic, 1)
  for (int g = 0; g < n; ++g) {
    try {
      results[g] = run_thread(matches, cue_b, cue_c, cfg, g);
    } catch (const Error& e) {
      failed[g] = 1;
      messages[g] = e.what();
    }
  }

  int winner = -1;
  for (int g = 0; g < n; ++g) {
    if (failed[g]) continue;
    if (winner < 0 || results[g].global_mse < results[winner].global_mse) winner = g;
  }
  if (trace) {
    trace->thread_mse.clear();
    for (int g = 0; g < n; ++g) {
      trace->thread_mse.push_back(failed[g] ? std::numeric_limits<double>::infinity()
                                            : results[g].global_mse);
    }
    trace->thread_sequences = results;
    trace->winner = winner;
  }
  if (winner < 0) throw Error(ErrorCode::NoConsensus, messages[0]);
  return results[winner];
}

GrayImage apply_sequence(const GrayImage& input, const OperationSequence& seq) {
  GrayImage accum(input.width(), input.height());
  for (const auto& step : seq.steps) {
    const GrayImage warped = warp_affine(input, step.transform, input.width(), input.height());
    accum = combine_threshold(accum, warped, step.threshold, step.dir);
  }
  return accum;
}

std::array<GrayImage, 3> extract_windows(const TrialLayout& layout, const GrayImage& screen) {
  return {crop(screen, layout.windows[0]), crop(screen, layout.windows[1]),
          crop(screen, layout.windows[2])};
}

std::array<GrayImage, 2> extract_choices(const TrialLayout& layout, const GrayImage& screen) {
  return {crop(screen, layout.choices[0]), crop(screen, layout.choices[1])};
}

Prediction choose(GrayImage full, GrayImage cropped, const GrayImage& choice0,
                  const GrayImage& choice1) {
  Prediction p;
  p.full = std::move(full);
  p.cropped = std::move(cropped);
  p.choice_mse = {mse(p.cropped, choice0), mse(p.cropped, choice1)};
  const double diff = p.choice_mse[1] - p.choice_mse[0];
  p.tie = std::abs(diff) < 1e-9;
  p.chosen = (p.tie || diff > 0) ? 0 : 1;
  p.margin = p.chosen == 0 ? diff : -diff;
  return p;
}

Prediction predict_and_choose(const TrialLayout& layout, const GrayImage& screen,
                              const OperationSequence& seq,
                              const std::array<GrayImage, 2>& choices) {
  const GrayImage cue_c = crop(screen, layout.windows[2]);
  GrayImage full = apply_sequence(cue_c, seq);
  const Rect region = blank_in_target(layout);
  GrayImage cropped = crop(full, region);
  std::array<GrayImage, 2> inner;
  for (int i = 0; i < 2; ++i) {
    const Rect r{1, 1, choices[i].width() - 2, choices[i].height() - 2};
    inner[i] = crop(choices[i], r);
    if (!inner[i].same_shape(cropped)) {
      throw Error(ErrorCode::DimensionMismatch, "choice interior does not match the blank size");
    }
  }
  return choose(std::move(full), std::move(cropped), inner[0], inner[1]);
}

std::vector<GrayImage> extrapolate(const GrayImage& start, const OperationSequence& seq, int n_steps) {
  if (n_steps < 1) throw Error(ErrorCode::InvalidArgument, "n_steps must be at least 1");
  std::vector<GrayImage> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  out.push_back(apply_sequence(start, seq));
  for (int k = 1; k < n_steps; ++k) out.push_back(apply_sequence(out.back(), seq));
  return out;
}

}  // namespace mr
