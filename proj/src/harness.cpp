#include "mr/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <omp.h>

#include "mr/error.hpp"
#include "mr/rng.hpp"

namespace mr {

std::uint64_t trial_seed(std::uint64_t agent_seed, const std::string& trial_id) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : trial_id) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return derive_seed(agent_seed, h);
}

namespace {

std::string step_summary(const OperationStep& s) {
  char buf[48];
  std::snprintf(buf, sizeof buf, " | threshold=%d %s", s.threshold, to_string(s.dir).c_str());
  return describe(classify(s.transform)) + buf;
}

bool searchable_failure(ErrorCode c) {
  return c == ErrorCode::NoFeatures || c == ErrorCode::TooFewMatches || c == ErrorCode::NoConsensus;
}

}  // namespace

TrialResult solve_trial(const TrialMeta& meta, const GrayImage& screen, const SearchConfig& cfg,
                        SolveDetail* detail) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialResult r;
  r.trial_id = meta.id;
  r.condition = meta.condition;

  const TrialLayout layout = identify_layout(screen);
  const auto windows = extract_windows(layout, screen);
  const auto choices = extract_choices(layout, screen);

  SearchConfig local = cfg;
  local.seed = trial_seed(cfg.seed, meta.id);
  SolveDetail d;
  d.layout = layout;
  d.windows = windows;
  try {
    d.sequence = derive_sequence(windows[0], windows[1], windows[2], local, &d.trace);
    d.prediction = predict_and_choose(layout, screen, d.sequence, choices);
    r.global_mse = d.sequence.global_mse;
    for (const auto& s : d.sequence.steps) r.sequence_summary.push_back(step_summary(s));
  } catch (const Error& e) {
    if (!searchable_failure(e.code())) throw;
    // Degraded answer: the choice that looks most like cue C.
    r.fallback = true;
    r.fallback_reason = to_string(e.code());
    const Rect region = blank_in_target(layout);
    GrayImage c_region = crop(windows[2], region);
    auto interior = [](const GrayImage& c) { return crop(c, choice_content({0, 0, c.width(), c.height()})); };
    d.prediction = choose(windows[2], std::move(c_region), interior(choices[0]), interior(choices[1]));
    r.global_mse = std::numeric_limits<double>::quiet_NaN();
  }
  r.n_features = d.trace.matches;
  r.chosen = d.prediction.chosen;
  r.correct = r.chosen == meta.correct;
  r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (detail) *detail = std::move(d);
  return r;
}

TrialResult solve_trial(const TrialMeta& meta, const std::filesystem::path& dataset_dir,
                        const SearchConfig& cfg, SolveDetail* detail) {
  return solve_trial(meta, load_png(dataset_dir / meta.cue_path), cfg, detail);
}

Regression fit_ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "regression columns differ in length");
  Regression r;
  r.n = x.size();
  if (r.n == 0) return r;
  const double n = static_cast<double>(r.n);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  r.intercept = my;
  if (sxx <= 0.0 || syy <= 0.0) return r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  const double sse = std::max(0.0, syy - r.slope * sxy);
  r.r_squared = 1.0 - sse / syy;
  if (r.n <= 2) return r;
  const double dof = n - 2;
  const double se = std::sqrt(sse / dof / sxx);
  if (se == 0.0) {
    r.p_value = 0.0;
    return r;
  }
  const double t = std::abs(r.slope / se);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(dof), t));
  return r;
}

double bernoulli_sample_std(int successes, int n) {
  if (n < 2) return 0.0;
  const double p = static_cast<double>(successes) / n;
  return std::sqrt(p * (1 - p) * n / (n - 1));
}

EvaluationReport summarize(std::vector<TrialResult> rows, int n_agents, std::uint64_t dataset_seed,
                           std::uint64_t base_seed) {
  std::stable_sort(rows.begin(), rows.end(), [](const TrialResult& a, const TrialResult& b) {
    return a.agent != b.agent ? a.agent < b.agent : a.trial_id < b.trial_id;
  });
  EvaluationReport rep;
  rep.dataset_seed = dataset_seed;
  rep.base_seed = base_seed;
  rep.n_agents = n_agents;
  for (Condition c : kAllConditions) {
    ConditionSummary& s = rep.conditions[static_cast<int>(c)];
    s.condition = c;
    std::vector<int> agent_trials(n_agents, 0), agent_correct(n_agents, 0);
    std::vector<double> x, y;
    for (const auto& r : rows) {
      if (r.condition != c) continue;
      ++s.trials;
      s.correct += r.correct;
      s.fallbacks += r.fallback;
      if (r.agent >= 0 && r.agent < n_agents) {
        ++agent_trials[r.agent];
        agent_correct[r.agent] += r.correct;
      }
      x.push_back(static_cast<double>(r.n_features));
      y.push_back(r.correct ? 1.0 : 0.0);
    }
    s.accuracy = s.trials ? static_cast<double>(s.correct) / s.trials : 0.0;
    s.trial_std = bernoulli_sample_std(s.correct, s.trials);
    for (int a = 0; a < n_agents; ++a) {
      s.agent_accuracy.push_back(agent_trials[a] ? static_cast<double>(agent_correct[a]) / agent_trials[a] : 0.0);
    }
    s.regression = fit_ols(x, y);
  }
  rep.rows = std::move(rows);
  return rep;
}

EvaluationReport evaluate(const TrialManifest& manifest, const std::filesystem::path& dataset_dir,
                          int n_agents, std::uint64_t base_seed, const SearchConfig& base_cfg) {
  if (n_agents < 1) throw Error(ErrorCode::InvalidArgument, "need at least one agent");
  const long n_trials = static_cast<long>(manifest.trials.size());
  std::vector<TrialResult> rows(static_cast<std::size_t>(n_trials) * n_agents);
  std::vector<std::string> errors(rows.size());
  std::vector<int> codes(rows.size(), -1);
  const long total = static_cast<long>(rows.size());
  // Trial-major order so each screen is decoded once for all agents.
#pragma omp parallel for schedule(dynamic, 1)
  for (long t = 0; t < n_trials; ++t) {
    const TrialMeta& meta = manifest.trials[static_cast<std::size_t>(t)];
    GrayImage screen;
    try {
      screen = load_png(dataset_dir / meta.cue_path);
    } catch (const Error& e) {
      errors[t] = e.what();
      codes[t] = static_cast<int>(e.code());
      continue;
    }
    for (int a = 0; a < n_agents; ++a) {
      const std::size_t idx = static_cast<std::size_t>(a) * n_trials + t;
      try {
        SearchConfig cfg = base_cfg;
        cfg.seed = base_seed + static_cast<std::uint64_t>(a);
        rows[idx] = solve_trial(meta, screen, cfg);
        rows[idx].agent = a;
      } catch (const Error& e) {
        errors[idx] = e.what();
        codes[idx] = static_cast<int>(e.code());
      }
    }
  }
  for (long i = 0; i < total; ++i) {
    if (codes[i] >= 0) throw Error(static_cast<ErrorCode>(codes[i]), errors[i]);
  }
  return summarize(std::move(rows), n_agents, manifest.dataset_seed, base_seed);
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

constexpr std::array<ReferenceFigures, 4> kModel = {{{1.0, 0.0}, {0.8875, 0.3163}, {0.8229, 0.3821}, {0.6333, 0.4824}}};
constexpr std::array<ReferenceFigures, 4> kHuman = {
    {{0.9636, 0.1873}, {0.956, 0.205}, {0.9354, 0.2458}, {0.9496, 0.2186}}};

}  // namespace

ReferenceFigures model_reference(Condition c) { return kModel[static_cast<int>(c)]; }
ReferenceFigures human_reference(Condition c) { return kHuman[static_cast<int>(c)]; }

void report_csv(const EvaluationReport& report, const std::filesystem::path& path, bool record_timing) {
  std::string out = "agent,condition,trial_id,chosen,correct,n_features,global_mse,wall_time_ms\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.agent) + ',' + to_string(r.condition) + ',' + r.trial_id + ',' +
           std::to_string(r.chosen) + ',' + (r.correct ? "1" : "0") + ',' + std::to_string(r.n_features) + ',' +
           (std::isnan(r.global_mse) ? std::string("NA") : fmt("%.4f", r.global_mse)) + ',' +
           (record_timing ? fmt("%.3f", r.wall_time_ms) : std::string("NA")) + '\n';
  }
  if (!report.rows.empty()) {
    out += "# summary\n# condition,trials,correct,accuracy,trial_std,fallbacks,intercept,slope,p_value,r_squared\n";
    for (const auto& s : report.conditions) {
      out += "# " + to_string(s.condition) + ',' + std::to_string(s.trials) + ',' + std::to_string(s.correct) + ',' +
             fmt("%.6f", s.accuracy) + ',' + fmt("%.6f", s.trial_std) + ',' + std::to_string(s.fallbacks) + ',' +
             fmt("%.6g", s.regression.intercept) + ',' + fmt("%.6g", s.regression.slope) + ',' +
             fmt("%.6g", s.regression.p_value) + ',' + fmt("%.6g", s.regression.r_squared) + '\n';
    }
  }
  write_file(path, out);
}

void report_json(const EvaluationReport& report, const std::filesystem::path& path) {
  using nlohmann::ordered_json;
  ordered_json conds = ordered_json::object();
  for (const auto& s : report.conditions) {
    const auto m = model_reference(s.condition);
    const auto h = human_reference(s.condition);
    conds[to_string(s.condition)] = {
        {"trials", s.trials},
        {"correct", s.correct},
        {"accuracy", s.accuracy},
        {"trial_std", s.trial_std},
        {"agent_accuracy", s.agent_accuracy},
        {"fallbacks", s.fallbacks},
        {"regression",
         {{"intercept", s.regression.intercept},
          {"slope", s.regression.slope},
          {"p_value", s.regression.p_value},
          {"r_squared", s.regression.r_squared},
          {"n", s.regression.n}}},
        {"reference_model", {{"accuracy", m.accuracy}, {"std", m.std}}},
        {"reference_human", {{"accuracy", h.accuracy}, {"std", h.std}}}};
  }
  std::vector<int> per_agent(report.n_agents, 0);
  for (const auto& r : report.rows) {
    if (r.agent >= 0 && r.agent < report.n_agents) ++per_agent[r.agent];
  }
  const ordered_json doc = {{"dataset_seed", report.dataset_seed},
                            {"base_seed", report.base_seed},
                            {"agents", report.n_agents},
                            {"trials_per_agent", per_agent},
                            {"conditions", conds}};
  write_file(path, doc.dump(2) + "\n");
}

std::optional<int> apply_thread_cap() {
  const char* env = std::getenv("MR_THREADS");
  if (!env || !*env) return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw Error(ErrorCode::InvalidArgument, "MR_THREADS must be a positive integer");
  omp_set_num_threads(static_cast<int>(n));
  return static_cast<int>(n);
}

}  // namespace mr
