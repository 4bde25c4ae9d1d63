// Command-line driver: dataset generation, single-trial solving, batch
// evaluation and extrapolation strips.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "mr/error.hpp"
#include "mr/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void print_error(std::string_view code, const std::string& message) {
  std::cerr << ordered_json{{"error", std::string(code)}, {"message", message}}.dump() << std::endl;
}

int cmd_generate(std::uint64_t seed, const fs::path& out) {
  const mr::TrialManifest m = mr::generate_dataset(seed, out);
  ordered_json counts = ordered_json::object();
  const auto c = m.counts();
  for (mr::Condition cond : mr::kAllConditions) counts[mr::to_string(cond)] = c[static_cast<int>(cond)];
  std::cout << ordered_json{{"dataset", out.string()}, {"trials", m.trials.size()}, {"counts", counts}}.dump()
            << '\n';
  return 0;
}

int cmd_solve(const std::string& id, const fs::path& dataset, std::uint64_t seed, const std::string& dump_png,
              bool dump_sequence) {
  const mr::TrialManifest m = mr::load_manifest(dataset);
  const mr::TrialMeta& meta = m.find(id);
  mr::SearchConfig cfg;
  cfg.seed = seed;
  mr::SolveDetail detail;
  const mr::TrialResult r = mr::solve_trial(meta, dataset, cfg, &detail);
  if (!dump_png.empty()) mr::save_png(detail.prediction.full, dump_png);

  ordered_json out = {{"trial_id", r.trial_id},
                      {"condition", mr::to_string(r.condition)},
                      {"chosen", r.chosen},
                      {"correct", r.correct},
                      {"answer", meta.correct},
                      {"n_features", r.n_features},
                      {"global_mse", r.fallback ? ordered_json(nullptr) : ordered_json(r.global_mse)},
                      {"choice_mse", detail.prediction.choice_mse},
                      {"fallback", r.fallback}};
  if (r.fallback) out["fallback_reason"] = r.fallback_reason;
  out["sequence_summary"] = r.sequence_summary;
  if (dump_sequence) {
    ordered_json steps = ordered_json::array();
    for (const auto& s : detail.sequence.steps) {
      const auto& t = s.transform;
      steps.push_back({{"matrix", {{t.a, t.b, t.tx}, {t.c, t.d, t.ty}}},
                       {"class", mr::describe(mr::classify(t))},
                       {"threshold", s.threshold},
                       {"direction", mr::to_string(s.dir)}});
    }
    out["sequence"] = steps;
    out["thread_mse"] = detail.trace.thread_mse;
    out["winner"] = detail.trace.winner;
    out["features"] = {detail.trace.features_a, detail.trace.features_b};
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& dataset, int agents, std::uint64_t seed, const std::string& csv,
                 const std::string& json_path, bool record_timing) {
  const mr::TrialManifest m = mr::load_manifest(dataset);
  const mr::EvaluationReport rep = mr::evaluate(m, dataset, agents, seed);
  if (!csv.empty()) mr::report_csv(rep, csv, record_timing);
  if (!json_path.empty()) mr::report_json(rep, json_path);
  std::printf("%-22s %8s %8s %8s   %s\n", "condition", "acc", "std", "fallback", "reference model (acc/std)");
  for (const auto& s : rep.conditions) {
    const auto ref = mr::model_reference(s.condition);
    std::printf("%-22s %7.2f%% %7.2f%% %8d   %.2f%% / %.2f%%\n", mr::to_string(s.condition).c_str(),
                100 * s.accuracy, 100 * s.trial_std, s.fallbacks, 100 * ref.accuracy, 100 * ref.std);
  }
  return 0;
}

int cmd_extrapolate(const std::string& id, const fs::path& dataset, std::uint64_t seed, int steps,
                    const fs::path& out_dir) {
  if (steps < 1) throw mr::Error(mr::ErrorCode::InvalidArgument, "--steps must be at least 1");
  const mr::TrialManifest m = mr::load_manifest(dataset);
  const mr::TrialMeta& meta = m.find(id);
  const mr::GrayImage screen = mr::load_png(dataset / meta.cue_path);
  const mr::TrialLayout layout = mr::identify_layout(screen);
  const auto w = mr::extract_windows(layout, screen);
  mr::SearchConfig cfg;
  cfg.seed = mr::trial_seed(seed, meta.id);
  const mr::OperationSequence seq = mr::derive_sequence(w[0], w[1], w[2], cfg);
  const auto predicted = mr::extrapolate(w[2], seq, steps);

  // Cues A, B, C followed by the predicted panels, separated by grey bars.
  constexpr int kGap = 6;
  const int pw = w[0].width(), ph = w[0].height();
  const int n = 3 + steps;
  mr::GrayImage strip(n * pw + (n - 1) * kGap, ph);
  for (int k = 0; k < n; ++k) {
    const mr::GrayImage& panel = k < 3 ? w[k] : predicted[k - 3];
    mr::paste(strip, panel, k * (pw + kGap), 0);
    if (k + 1 < n) {
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < kGap; ++x) strip.at(k * (pw + kGap) + pw + x, y) = 96;
      }
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw mr::Error(mr::ErrorCode::IoError, "cannot create " + out_dir.string());
  const fs::path path = out_dir / (meta.id + "_extrapolation.png");
  mr::save_png(strip, path);
  std::cout << ordered_json{{"trial_id", meta.id}, {"steps", steps}, {"strip", path.string()}}.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual analogy solver for simplified progressive-matrix trials"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out, dataset = "dataset", trial, dump_png, csv, json_path;
  bool dump_sequence = false, record_timing = false;
  int agents = 5, steps = 3;

  auto* gen = app.add_subcommand("generate", "Write a 384-trial dataset");
  gen->add_option("--seed", seed, "dataset seed")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "Solve one trial and print diagnostics");
  solve->add_option("--trial", trial, "trial id")->required();
  solve->add_option("--dataset", dataset, "dataset directory")->required();
  solve->add_option("--seed", seed, "agent seed");
  solve->add_option("--dump-prediction", dump_png, "write the predicted panel D as PNG");
  solve->add_flag("--dump-sequence", dump_sequence, "include the full operation sequence");

  auto* eval = app.add_subcommand("evaluate", "Run agents over a whole dataset");
  eval->add_option("--dataset", dataset, "dataset directory")->required();
  eval->add_option("--agents", agents, "number of agents")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "base agent seed");
  eval->add_option("--csv", csv, "per-trial CSV report");
  eval->add_option("--json", json_path, "summary JSON report");
  eval->add_flag("--record-timing", record_timing, "write wall times into the CSV (not reproducible)");

  auto* extra = app.add_subcommand("extrapolate", "Iterate the derived rule beyond panel D");
  extra->add_option("--trial", trial, "trial id")->required();
  extra->add_option("--dataset", dataset, "dataset directory");
  extra->add_option("--seed", seed, "agent seed");
  extra->add_option("--steps", steps, "number of predicted panels")->required();
  extra->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("UsageError", e.what());
    return 2;
  }

  try {
    mr::apply_thread_cap();
    if (*gen) return cmd_generate(seed, out);
    if (*solve) return cmd_solve(trial, dataset, seed, dump_png, dump_sequence);
    if (*eval) return cmd_evaluate(dataset, agents, seed, csv, json_path, record_timing);
    if (*extra) return cmd_extrapolate(trial, dataset, seed, steps, out);
  } catch (const mr::Error& e) {
    print_error(mr::to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
