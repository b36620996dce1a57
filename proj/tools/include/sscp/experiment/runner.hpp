#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sscp/experiment/config.hpp"
#include "sscp/metrics.hpp"

namespace sscp::experiment {

/// One (dataset, label fraction, seed, method) run.
struct RunRecord {
  std::string id;
  std::string dataset;
  double label_fraction = 1.0;
  std::string method;
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  metrics::IntervalReport report;
  double epsilon = 0.0;
  double crossing_rate = 0.0;
  /// Per test sample, aligned with report.samples.
  std::vector<double> pc1;
  std::vector<double> ss_error;
  std::vector<double> sigma;
  /// Synthetic latent L (empty for CSV datasets).
  std::vector<double> latent;
};

/// Held-out mean absolute error of sigma against |y - f(x)| on the test
/// split, with and without the SS feature.
struct SigmaRecord {
  std::string dataset;
  double label_fraction = 1.0;
  std::size_t seed_index = 0;
  double mae_without_ss = 0.0;
  double mae_with_ss = 0.0;

  double relative_change() const noexcept { return (mae_with_ss - mae_without_ss) / mae_without_ss; }
};

/// Correlation between the SS error and |y - f(x)| on the test split.
struct CorrelationRecord {
  std::string dataset;
  double label_fraction = 1.0;
  std::size_t seed_index = 0;
  double pearson = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<SigmaRecord> sigma;
  std::vector<CorrelationRecord> correlation;
  std::vector<std::uint64_t> seeds;
  double wall_seconds = 0.0;

  std::size_t n_failed() const noexcept;
  const RunRecord* find(std::string_view dataset, double label_fraction, std::string_view method,
                        std::size_t seed_index) const noexcept;
};

struct RunOptions {
  bool write_files = true;
  /// Progress lines; null for silence.
  std::function<void(const std::string&)> log;
};

/// Seed of replicate `index` under `master`.
std::uint64_t replicate_seed(std::uint64_t master, std::size_t index) noexcept;

/// Runs every (dataset, p, seed, method) combination. Within one replicate
/// all methods share the split, the standardization, the predictor f and
/// the pretext model. A failing run is recorded and the others proceed.
/// Dataset and config errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes aggregate.csv, per_sample_<run>.csv, sigma_mae.csv,
/// ss_correlation.csv and manifest.json under config.out.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace sscp::experiment
