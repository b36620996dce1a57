#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sscp/data.hpp"
#include "sscp/error.hpp"
#include "sscp/experiment/config.hpp"
#include "sscp/experiment/report.hpp"
#include "sscp/experiment/runner.hpp"

namespace {

using namespace sscp;
using namespace sscp::experiment;

constexpr int kExitOk = 0;
constexpr int kExitAllFailed = 1;
constexpr int kExitConfig = 2;

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool zero_ss = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Override the master seed");
  cmd->add_option("--out", flags.out, "Output directory (overrides the config)");
  cmd->add_flag("--zero-ss-feature", flags.zero_ss, "Replace every self-supervised error by 0 (debug ablation)");
}

int run(const RunFlags& flags, std::optional<ExperimentKind> force_kind) {
  ExperimentConfig config;
  try {
    auto doc = nlohmann::json::parse(std::ifstream(flags.config), nullptr, true, false);
    if (force_kind) doc["experiment"] = std::string(to_string(*force_kind));
    config = ExperimentConfig::from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config " << flags.config << " is not valid JSON: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out.empty()) config.out = flags.out;
  if (flags.zero_ss) config.zero_ss_feature = true;

  RunOptions options;
  options.log = [](const std::string& line) { std::cerr << line << '\n'; };
  try {
    const auto result = run_experiment(config, options);
    const std::size_t failed = result.n_failed();
    std::cerr << result.runs.size() - failed << " of " << result.runs.size() << " runs succeeded; outputs in "
              << config.out.string() << '\n';
    return !result.runs.empty() && failed == result.runs.size() ? kExitAllFailed : kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal prediction intervals with self-supervised normalization"};
  app.require_subcommand(1);

  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic step-function dataset as CSV");
  synth->add_option("--n", synth_n, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output CSV path")->required();

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  add_run_flags(run_cmd, run_flags);

  RunFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Run the unlabeled-data ablation (SSCP on labeled vs all rows)");
  add_run_flags(ablate, ablate_flags);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Write plot-ready tables from the outputs of a run");
  report->add_option("--out", report_dir, "Directory holding aggregate.csv")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto samples = data::synth_generate(synth_n, synth_seed);
      data::write_csv(synth_out, data::to_dataset(samples));
      std::cerr << "wrote " << synth_n << " samples to " << synth_out << '\n';
      return kExitOk;
    }
    if (*run_cmd) return run(run_flags, std::nullopt);
    if (*ablate) return run(ablate_flags, ExperimentKind::kAblationUnlabeled);
    if (*report) {
      const auto summary = emit_plot_data(report_dir);
      for (const auto& f : summary.files) std::cout << f.string() << '\n';
      for (const auto& g : summary.gaps) std::cerr << "gap: " << g << '\n';
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
