#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "mr/error.hpp"
#include "mr/harness.hpp"
#include "mr/kernels.hpp"
#include "support.hpp"

using namespace mr;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void paint(GrayImage& dst, const Rect& r, const GrayImage& src) {
  for (int y = 0; y < r.h; ++y) {
    for (int x = 0; x < r.w; ++x) dst.at(r.x + x, r.y + y) = src.at(x, y);
  }
}

// Writes cue screens for the given trials and a manifest next to them.
TrialManifest write_dataset(const std::filesystem::path& dir, const std::vector<Trial>& trials) {
  std::filesystem::create_directories(dir / "trials");
  TrialManifest m;
  m.dataset_seed = 0;
  for (const Trial& t : trials) {
    save_png(t.cue_screen, dir / t.meta.cue_path);
    m.trials.push_back(t.meta);
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

std::vector<Trial> mixed_trials() {
  std::vector<Trial> out;
  for (Condition c : kAllConditions) {
    out.push_back(generate_trial(0, c, 1, 0));
    out.push_back(generate_trial(0, c, 4, 3));
  }
  return out;
}

// Ordinary least squares through the normal equations, slope t statistic.
struct OlsOracle {
  double intercept, slope, t, r2;
};
OlsOracle ols_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  const double b = (n * sxy - sx * sy) / det;
  const double a = (sy - b * sx) / n;
  double sse = 0, sst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - a - b * x[i];
    sse += e * e;
    sst += (y[i] - sy / n) * (y[i] - sy / n);
  }
  const double se_b = std::sqrt(sse / (n - 2) * n / det);
  return {a, b, b / se_b, 1 - sse / sst};
}

// Two-sided Student t tail by Simpson integration of the density on [0, |t|].
double t_two_sided(double t, double dof) {
  const double c = std::exp(std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2)) / std::sqrt(dof * std::numbers::pi);
  auto f = [&](double u) { return c * std::pow(1 + u * u / dof, -(dof + 1) / 2); };
  const int n = 20000;
  const double h = std::abs(t) / n;
  double s = f(0) + f(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(i * h);
  return std::max(0.0, 1 - 2 * s * h / 3);
}

}  // namespace

TEST_CASE("symbolic matching trial is solved by an identity step") {
  const Trial t = generate_trial(0, Condition::SymbolicMatching, 2, 0);
  SearchConfig cfg;
  cfg.seed = 4;
  SolveDetail d;
  const TrialResult r = solve_trial(t.meta, t.cue_screen, cfg, &d);
  CHECK(r.correct);
  CHECK(!r.fallback);
  CHECK(r.n_features > 0);
  REQUIRE(!r.sequence_summary.empty());
  CHECK(std::any_of(r.sequence_summary.begin(), r.sequence_summary.end(),
                    [](const std::string& s) { return s.find("Identity") != std::string::npos; }));
  CHECK(d.layout == t.meta.layout);
}

TEST_CASE("featureless cue windows fall back to the closest choice") {
  Trial t = generate_trial(0, Condition::SymbolicMatching, 3, 1);
  for (const Rect& w : t.meta.layout.windows) paint(t.cue_screen, w, GrayImage(w.w, w.h));
  const TrialResult r = solve_trial(t.meta, t.cue_screen, SearchConfig{});
  CHECK(r.fallback);
  CHECK(r.fallback_reason == "NoFeatures");
  CHECK(std::isnan(r.global_mse));
  CHECK(r.sequence_summary.empty());
  // An all-black C is nearer to the choice with less ink.
  std::array<double, 2> ink{};
  for (int k = 0; k < 2; ++k) {
    const GrayImage c = crop(t.cue_screen, choice_content(t.meta.layout.choices[k]));
    ink[k] = mse(c, GrayImage(c.width(), c.height()));
  }
  CHECK(r.chosen == (ink[1] < ink[0] ? 1 : 0));
}

TEST_CASE("solve_trial is deterministic for a fixed agent seed") {
  const Trial t = generate_trial(0, Condition::PerceptualReasoning, 6, 2);
  SearchConfig cfg;
  cfg.seed = 17;
  const TrialResult a = solve_trial(t.meta, t.cue_screen, cfg);
  const TrialResult b = solve_trial(t.meta, t.cue_screen, cfg);
  CHECK(a.chosen == b.chosen);
  CHECK(a.global_mse == b.global_mse);
  CHECK(a.n_features == b.n_features);
  CHECK(a.sequence_summary == b.sequence_summary);
}

TEST_CASE("layout failures are not absorbed by the fallback") {
  const Trial t = generate_trial(0, Condition::SymbolicMatching, 0, 0);
  GrayImage blank(t.cue_screen.width(), t.cue_screen.height());
  try {
    solve_trial(t.meta, blank, SearchConfig{});
    FAIL("expected LayoutNotRecognized");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LayoutNotRecognized);
  }
}

TEST_CASE("inverted distractors make matching trivially separable") {
  std::vector<Trial> trials;
  for (int b = 0; b < 6; ++b) {
    Trial t = generate_trial(1, Condition::SymbolicMatching, b, b % kPresentations);
    const Rect right = choice_content(t.meta.layout.choices[t.meta.correct]);
    const Rect wrong = choice_content(t.meta.layout.choices[1 - t.meta.correct]);
    GrayImage inv = crop(t.cue_screen, right);
    for (auto& p : inv.pixels()) p = static_cast<std::uint8_t>(255 - p);
    paint(t.cue_screen, wrong, inv);
    trials.push_back(std::move(t));
  }
  const auto dir = testsupport::scratch_dir("harness_inverted");
  const TrialManifest m = write_dataset(dir, trials);
  const EvaluationReport rep = evaluate(m, dir, 5, 0);
  const ConditionSummary& sm = rep.conditions[static_cast<int>(Condition::SymbolicMatching)];
  CHECK(sm.trials == 30);
  CHECK(sm.accuracy == 1.0);
  CHECK(sm.trial_std == 0.0);
  for (double a : sm.agent_accuracy) CHECK(a == 1.0);
}

TEST_CASE("single-agent evaluation equals mapping solve_trial over the manifest") {
  const auto dir = testsupport::scratch_dir("harness_map");
  const TrialManifest m = write_dataset(dir, mixed_trials());
  const EvaluationReport rep = evaluate(m, dir, 1, 9);
  REQUIRE(rep.rows.size() == m.trials.size());
  SearchConfig cfg;
  cfg.seed = 9;
  for (const TrialResult& row : rep.rows) {
    const TrialResult r = solve_trial(m.find(row.trial_id), dir, cfg);
    CAPTURE(row.trial_id);
    CHECK(row.chosen == r.chosen);
    CHECK(row.correct == r.correct);
    CHECK(row.n_features == r.n_features);
    CHECK(row.sequence_summary == r.sequence_summary);
    CHECK(row.fallback == r.fallback);
    if (!r.fallback) CHECK(row.global_mse == r.global_mse);
  }
}

TEST_CASE("report summaries agree with their rows") {
  const auto dir = testsupport::scratch_dir("harness_summary");
  const TrialManifest m = write_dataset(dir, mixed_trials());
  const EvaluationReport rep = evaluate(m, dir, 2, 3);
  CHECK(rep.rows.size() == 2 * m.trials.size());
  CHECK(std::is_sorted(rep.rows.begin(), rep.rows.end(), [](const TrialResult& a, const TrialResult& b) {
    return a.agent != b.agent ? a.agent < b.agent : a.trial_id < b.trial_id;
  }));
  for (const ConditionSummary& s : rep.conditions) {
    int n = 0, k = 0;
    std::vector<double> col;
    for (const auto& r : rep.rows) {
      if (r.condition != s.condition) continue;
      ++n;
      k += r.correct;
      col.push_back(r.correct ? 1.0 : 0.0);
    }
    CHECK(s.trials == n);
    CHECK(s.correct == k);
    CHECK(s.accuracy == doctest::Approx(static_cast<double>(k) / n));
    double mean = 0;
    for (double v : col) mean += v;
    mean /= n;
    double ss = 0;
    for (double v : col) ss += (v - mean) * (v - mean);
    CHECK(s.trial_std == doctest::Approx(std::sqrt(ss / (n - 1))).epsilon(1e-12));
  }
}

TEST_CASE("bernoulli std matches the sample formula") {
  for (int n = 2; n <= 40; n += 7) {
    for (int k = 0; k <= n; ++k) {
      const double p = static_cast<double>(k) / n;
      const double ss = k * (1 - p) * (1 - p) + (n - k) * p * p;
      CHECK(bernoulli_sample_std(k, n) == doctest::Approx(std::sqrt(ss / (n - 1))).epsilon(1e-12));
    }
  }
  CHECK(bernoulli_sample_std(1, 1) == 0.0);
  // Figure from the original model report: 88.75% over 5 agents x 96 trials.
  CHECK(bernoulli_sample_std(426, 480) == doctest::Approx(0.3163).epsilon(1e-3));
}

TEST_CASE("fit_ols agrees with the normal equations") {
  Rng rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 10 + static_cast<int>(rng.index(200));
    std::vector<double> x(n), y(n);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-0.05, 0.05);
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform(0, 400);
      y[i] = a + b * x[i] + rng.normal() * rng.uniform(0.1, 5);
    }
    const Regression r = fit_ols(x, y);
    const OlsOracle o = ols_oracle(x, y);
    CHECK(r.n == static_cast<std::size_t>(n));
    CHECK(r.intercept == doctest::Approx(o.intercept).epsilon(1e-9));
    CHECK(r.slope == doctest::Approx(o.slope).epsilon(1e-9));
    CHECK(r.r_squared == doctest::Approx(o.r2).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(t_two_sided(o.t, n - 2)).epsilon(1e-6));
  }
}

TEST_CASE("fit_ols p-values at known t quantiles") {
  // y = x + e with e chosen so the slope t statistic is exactly known.
  const std::vector<double> x = {-2, -1, 0, 1, 2};
  const std::vector<double> e = {1, -2, 0, 2, -1};
  // sum(x e) = -2+2+0+2-2 = 0, sum(e) = 0: slope 1, sse = 10, sxx = 10.
  std::vector<double> y(5);
  for (int i = 0; i < 5; ++i) y[i] = x[i] + e[i];
  const Regression r = fit_ols(x, y);
  CHECK(r.slope == doctest::Approx(1.0));
  CHECK(r.intercept == doctest::Approx(0.0));
  // se = sqrt(10 / 3 / 10), t = sqrt(3) on 3 dof. The t3 tail has a closed
  // form: p = 1 - (2/pi) (u / (1 + u^2) + atan u) with u = t / sqrt(3) = 1.
  CHECK(r.p_value == doctest::Approx(0.5 - 1.0 / std::numbers::pi).epsilon(1e-9));
  CHECK(r.r_squared == doctest::Approx(0.5));
}

TEST_CASE("fit_ols degenerate columns") {
  const std::vector<double> flat_x(10, 3.0), y = {0, 1, 0, 1, 1, 0, 1, 0, 1, 1};
  const Regression r = fit_ols(flat_x, y);
  CHECK(r.slope == 0.0);
  CHECK(r.p_value == 1.0);
  CHECK(r.intercept == doctest::Approx(0.6));
  const std::vector<double> x = {1, 2};
  const std::vector<double> y3 = {1, 2, 3};
  try {
    fit_ols(x, y3);
    FAIL("expected DimensionMismatch");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("planted step relation gives a significant positive slope") {
  Rng rng(5);
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    const double f = std::floor(rng.uniform(0, 300));
    x.push_back(f);
    y.push_back(f > 100 ? 1.0 : 0.0);
  }
  const Regression r = fit_ols(x, y);
  CHECK(r.slope > 0);
  CHECK(r.p_value < 0.01);

  int quiet = 0;
  for (int s = 0; s < 100; ++s) {
    std::vector<double> shuffled = y;
    Rng srng(1000 + s);
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[srng.index(i + 1)]);
    quiet += fit_ols(x, shuffled).p_value > 0.05;
  }
  CHECK(quiet >= 90);
}

TEST_CASE("csv output is stable, LF-only and sized by rows") {
  const auto dir = testsupport::scratch_dir("harness_csv");
  const TrialManifest m = write_dataset(dir, mixed_trials());
  const EvaluationReport a = evaluate(m, dir, 2, 0);
  const EvaluationReport b = evaluate(m, dir, 2, 0);
  report_csv(a, dir / "a.csv");
  report_csv(b, dir / "b.csv");
  report_json(a, dir / "a.json");
  report_json(b, dir / "b.json");
  const std::string text = read_bytes(dir / "a.csv");
  CHECK(text == read_bytes(dir / "b.csv"));
  CHECK(read_bytes(dir / "a.json") == read_bytes(dir / "b.json"));
  CHECK(text.find('\r') == std::string::npos);

  int data = 0, lines = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    REQUIRE(end != std::string::npos);
    const std::string line = text.substr(pos, end - pos);
    if (lines == 0) CHECK(line == "agent,condition,trial_id,chosen,correct,n_features,global_mse,wall_time_ms");
    if (lines > 0 && line[0] != '#') {
      ++data;
      CHECK(std::count(line.begin(), line.end(), ',') == 7);
      CHECK(line.ends_with(",NA"));
    }
    ++lines;
    pos = end + 1;
  }
  CHECK(data == 2 * static_cast<int>(m.trials.size()));

  report_csv(a, dir / "timed.csv", true);
  CHECK(read_bytes(dir / "timed.csv").find(",NA\n") == std::string::npos);

  EvaluationReport empty = summarize({}, 0, 0, 0);
  report_csv(empty, dir / "empty.csv");
  CHECK(read_bytes(dir / "empty.csv") == "agent,condition,trial_id,chosen,correct,n_features,global_mse,wall_time_ms\n");
}

TEST_CASE("evaluate rejects zero agents and missing files") {
  const auto dir = testsupport::scratch_dir("harness_missing");
  TrialManifest m;
  m.trials.push_back(generate_trial(0, Condition::SymbolicMatching, 0, 0).meta);
  try {
    evaluate(m, dir, 0, 0);
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
  try {
    evaluate(m, dir, 1, 0);
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

TEST_CASE("trial seeds separate agents and trials") {
  CHECK(trial_seed(0, "SM_00_n0") == trial_seed(0, "SM_00_n0"));
  CHECK(trial_seed(0, "SM_00_n0") != trial_seed(1, "SM_00_n0"));
  CHECK(trial_seed(0, "SM_00_n0") != trial_seed(0, "SM_00_n1"));
}

TEST_CASE("reference figures") {
  CHECK(model_reference(Condition::SymbolicReasoning).accuracy == 0.8875);
  CHECK(model_reference(Condition::PerceptualReasoning).std == 0.4824);
  CHECK(human_reference(Condition::SymbolicReasoning).accuracy == 0.956);
  CHECK(human_reference(Condition::SymbolicMatching).accuracy == 0.9636);
}
