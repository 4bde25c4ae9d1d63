#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mr/search.hpp"
#include "mr/taskgen.hpp"

namespace mr {

struct TrialResult {
  int agent = 0;
  std::string trial_id;
  Condition condition = Condition::SymbolicMatching;
  int chosen = 0;
  bool correct = false;
  std::size_t n_features = 0;  // A -> B matches surviving the ratio test
  double global_mse = 0.0;
  std::vector<std::string> sequence_summary;
  double wall_time_ms = 0.0;
  bool fallback = false;
  std::string fallback_reason;
};

/// Intermediate products of one solve, for diagnostics.
struct SolveDetail {
  TrialLayout layout;
  std::array<GrayImage, 3> windows;
  OperationSequence sequence;
  SearchTrace trace;
  Prediction prediction;
};

/// Search seed used for one trial of the agent with seed `agent_seed`.
std::uint64_t trial_seed(std::uint64_t agent_seed, const std::string& trial_id);

/// Locates the layout on `screen`, derives the operation sequence from cues
/// A, B, C and picks a choice. cfg.seed is the agent seed; the per-trial
/// search seed comes from trial_seed(). When the search cannot anchor
/// (NoFeatures, TooFewMatches, NoConsensus) the choice closest to cue C is
/// taken and the fallback flag is set.
TrialResult solve_trial(const TrialMeta& meta, const GrayImage& screen, const SearchConfig& cfg,
                        SolveDetail* detail = nullptr);
TrialResult solve_trial(const TrialMeta& meta, const std::filesystem::path& dataset_dir,
                        const SearchConfig& cfg, SolveDetail* detail = nullptr);

struct Regression {
  double intercept = 0.0;
  double slope = 0.0;
  double p_value = 1.0;  // two-sided t-test on the slope
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y ~ a + b x. Without variance in x or y the slope
/// is reported as 0 with p = 1.
Regression fit_ols(std::span<const double> x, std::span<const double> y);

/// Sample standard deviation (n - 1) of a 0/1 column.
double bernoulli_sample_std(int successes, int n);

struct ConditionSummary {
  Condition condition = Condition::SymbolicMatching;
  int trials = 0;   // summed over agents
  int correct = 0;
  double accuracy = 0.0;
  double trial_std = 0.0;
  int fallbacks = 0;
  std::vector<double> agent_accuracy;
  Regression regression;  // correctness on n_features, all agents pooled
};

struct EvaluationReport {
  std::uint64_t dataset_seed = 0;
  std::uint64_t base_seed = 0;
  int n_agents = 0;
  std::vector<TrialResult> rows;  // ordered by (agent, trial id)
  std::array<ConditionSummary, 4> conditions{};
};

/// Aggregates rows (re-sorted by agent and trial id).
EvaluationReport summarize(std::vector<TrialResult> rows, int n_agents, std::uint64_t dataset_seed,
                           std::uint64_t base_seed);

/// Agent k solves every trial with agent seed base_seed + k.
EvaluationReport evaluate(const TrialManifest& manifest, const std::filesystem::path& dataset_dir,
                          int n_agents, std::uint64_t base_seed, const SearchConfig& base_cfg = {});

/// Rows plus a '#'-prefixed summary block. wall_time_ms is written as NA
/// unless `record_timing` is set, so reruns are byte-identical.
void report_csv(const EvaluationReport& report, const std::filesystem::path& path, bool record_timing = false);
void report_json(const EvaluationReport& report, const std::filesystem::path& path);

/// Reference figures of the original model and of human participants.
struct ReferenceFigures {
  double accuracy;
  double std;
};
ReferenceFigures model_reference(Condition c);
ReferenceFigures human_reference(Condition c);

/// Applies the MR_THREADS cap, if set, to the OpenMP runtime. Returns the cap.
std::optional<int> apply_thread_cap();

}  // namespace mr
