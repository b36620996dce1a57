#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sscp/conformal.hpp"
#include "sscp/pipeline.hpp"

namespace sscp::experiment {

/// kSyntheticDemo: f is the zero function (the synthetic target is already a
/// residual), the pretext model reads raw features, and CRF/SSCP may be
/// calibrated out-of-bag. Only valid on synthetic datasets.
enum class Protocol { kStandard, kSyntheticDemo };

enum class ExperimentKind { kSynthetic, kLabeled, kSemiSupervised, kAblationUnlabeled, kCqr, kSanitySslNorm, kRobustness };

std::string_view to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> experiment_kind_from_string(std::string_view text) noexcept;

/// One method column of an experiment.
struct MethodSpec {
  conformal::Kind kind = conformal::Kind::kIcp;
  conformal::EncoderMode encoder = conformal::EncoderMode::kIndependent;
  /// Pretext rows for SSCP variants: nullopt follows the experiment default,
  /// false = labeled rows only, true = labeled plus unlabeled rows.
  std::optional<bool> include_unlabeled;
  /// Name used in output files, e.g. "CQR_SSCP(shared)".
  std::string label;

  bool needs_pretext() const noexcept;
};

/// Accepts ICP, CRF, SSCP, SSL_NORM, CQR, CQR_SSCP(shared), CQR_SSCP(indep),
/// SSCP(Labeled) and SSCP(ALL). Throws ConfigError otherwise.
MethodSpec parse_method(std::string_view text);

struct DatasetSpec {
  std::string name;
  /// CSV with a header row; empty for the synthetic generator.
  std::filesystem::path path;
  std::string target = "y";
  std::size_t synthetic_n = 1000;

  bool synthetic() const noexcept { return path.empty(); }
};

struct NetworkSpec {
  std::vector<std::size_t> hidden{64, 64};
  double dropout = 0.1;
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
};

struct PretextSpec {
  double p_corrupt = 0.3;
  double feature_weight = 2.0;
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  /// Head widths; empty picks the default. The synthetic autoencoder uses
  /// a single-unit bottleneck, 32-1-32.
  std::vector<std::size_t> hidden;
  std::vector<nn::Activation> activations;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kSynthetic;
  Protocol protocol = Protocol::kSyntheticDemo;
  std::vector<DatasetSpec> datasets;
  std::vector<MethodSpec> methods;
  pretext::PretextKind pretext = pretext::PretextKind::vime();
  double alpha = 0.1;
  /// Label fractions p; {1} means fully labeled.
  std::vector<double> label_fractions{1.0};
  std::size_t n_seeds = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out = "results";
  conformal::NormalizerBackend normalizer = conformal::NormalizerBackend::kMlp;
  std::size_t n_trees = 1000;
  std::size_t n_threads = 0;
  /// Demo protocol only: fit the forest on D_res and D_cal together and
  /// calibrate on its out-of-bag predictions.
  bool oob_calibration = true;
  bool double_dip = false;
  bool zero_ss_feature = false;
  bool write_per_sample = true;
  NetworkSpec network;
  PretextSpec pretext_settings;

  /// Defaults depend on the experiment kind, so `from_json` fills in what
  /// the document leaves out. Unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  /// Defaults for `kind` without any document.
  static ExperimentConfig defaults(ExperimentKind kind);
  nlohmann::json to_json() const;

  /// Throws ConfigError on an invalid combination.
  void validate() const;

  conformal::PipelineSettings pipeline_settings(std::uint64_t seed) const;
};

}  // namespace sscp::experiment
