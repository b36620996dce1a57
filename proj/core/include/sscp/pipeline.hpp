#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "sscp/conformal.hpp"
#include "sscp/matrix.hpp"
#include "sscp/nn/mlp.hpp"
#include "sscp/pretext.hpp"

namespace sscp::conformal {

enum class Kind { kIcp, kCrf, kSscp, kSslNorm, kCqr, kCqrSscp };
enum class EncoderMode { kShared, kIndependent };

std::string_view to_string(Kind kind) noexcept;
std::optional<Kind> kind_from_string(std::string_view text) noexcept;

/// Standardized splits consumed by the pipelines. `x_unlabeled` only ever
/// feeds pretext training.
struct ConformalData {
  RealMatrix x_train;
  std::vector<double> y_train;
  RealMatrix x_unlabeled;
  RealMatrix x_res;
  std::vector<double> y_res;
  RealMatrix x_cal;
  std::vector<double> y_cal;

  std::size_t n_features() const noexcept { return x_train.cols(); }
  /// Throws ShapeError/EmptyInputError on inconsistent or empty parts.
  void validate(bool needs_res) const;
  /// Labeled training rows, plus unlabeled rows when requested.
  RealMatrix pretext_rows(bool include_unlabeled) const;
};

struct PipelineSettings {
  double alpha = 0.1;
  /// Template for the predictor, normalizer and quantile networks; layer
  /// sizes are derived from the data.
  nn::MlpConfig network = nn::MlpConfig::regressor(1);
  pretext::PretextKind pretext = pretext::PretextKind::vime();
  pretext::PretextSettings pretext_settings;
  NormalizerBackend normalizer_backend = NormalizerBackend::kMlp;
  forest::ForestConfig forest;
  /// Train the pretext on the unlabeled rows as well as the labeled ones.
  bool include_unlabeled = true;
  /// Replace every self-supervised error by 0 (ablation).
  bool zero_ss_feature = false;
  /// Train sigma on D_train instead of D_res.
  bool double_dip = false;
  std::uint64_t seed = 0;
};

/// Per-sample outputs of a calibrated predictor.
struct Prediction {
  std::vector<Interval> intervals;
  /// f(x), or the interval midpoint for quantile models.
  std::vector<double> point;
  /// Normalizer output (1 for ICP, NaN for quantile models).
  std::vector<double> sigma;
  /// Self-supervised error fed to the method (NaN when unused).
  std::vector<double> ss_error;
};

/// A fitted conformal predictor: the critical score and the models it
/// rescales.
class CalibratedConformal {
 public:
  Kind kind = Kind::kIcp;
  double alpha = 0.1;
  double epsilon = 0.0;
  /// Nonconformity scores on the calibration set.
  std::vector<double> calibration_scores;
  /// Share of calibration rows whose quantile heads crossed (quantile kinds).
  double crossing_rate = 0.0;

  /// f for CRF-style kinds; the two-output quantile network for CQR kinds.
  /// Null means the zero predictor.
  std::shared_ptr<const nn::Mlp> model;
  std::optional<Normalizer> sigma;
  std::shared_ptr<const pretext::SsModel> ss_model;
  /// The pretext input carries a trailing 0 slot (shared-encoder CQR).
  bool ss_placeholder = false;
  bool zero_ss_feature = false;
  /// Constant factor applied to every normalizer output.
  double sigma_scale = 1.0;

  std::vector<double> ss_errors(const RealMatrix& x) const;
  Prediction predict(const RealMatrix& x) const;
  /// Same predictor with sigma multiplied by `factor` and epsilon
  /// recalibrated; intervals are unchanged up to rounding.
  CalibratedConformal with_scaled_sigma(double factor, const RealMatrix& x_cal, std::span<const double> y_cal) const;

 private:
  std::vector<double> point_predictions(const RealMatrix& x) const;
  std::vector<double> sigma_values(const RealMatrix& x, std::span<const double> errs) const;
  void calibrate(const RealMatrix& x_cal, std::span<const double> y_cal);

  friend CalibratedConformal calibrate_with(CalibratedConformal, const RealMatrix&, std::span<const double>);
  friend CalibratedConformal forest_oob_fit(std::shared_ptr<const nn::Mlp>, std::shared_ptr<const pretext::SsModel>,
                                            const RealMatrix&, std::span<const double>, const PipelineSettings&);
};

/// Fills in epsilon and the calibration scores from (x_cal, y_cal).
CalibratedConformal calibrate_with(CalibratedConformal predictor, const RealMatrix& x_cal,
                                   std::span<const double> y_cal);

/// Network config from the template with the given widths and seed.
nn::MlpConfig network_config(const nn::MlpConfig& base, std::size_t n_inputs, std::size_t n_outputs,
                             std::uint64_t seed);

/// f trained with MSE on the labeled training rows.
nn::Mlp train_predictor(const ConformalData& data, const PipelineSettings& settings);

/// f_ss on top of the frozen encoder of `predictor`.
pretext::SsModel train_pretext_on(const nn::Mlp& predictor, const RealMatrix& rows, const PipelineSettings& settings);

CalibratedConformal icp_fit(std::shared_ptr<const nn::Mlp> predictor, const ConformalData& data,
                            const PipelineSettings& settings);
CalibratedConformal crf_fit(std::shared_ptr<const nn::Mlp> predictor, const ConformalData& data,
                            const PipelineSettings& settings);
/// SSCP from an already trained predictor and pretext model (shared across
/// the methods of one run).
CalibratedConformal sscp_fit(std::shared_ptr<const nn::Mlp> predictor,
                             std::shared_ptr<const pretext::SsModel> ss_model, const ConformalData& data,
                             const PipelineSettings& settings);
/// Trains f and f_ss, then fits sigma and calibrates.
CalibratedConformal sscp_fit(const ConformalData& data, const PipelineSettings& settings);
CalibratedConformal ssl_norm_fit(std::shared_ptr<const nn::Mlp> predictor,
                                 std::shared_ptr<const pretext::SsModel> ss_model, const ConformalData& data,
                                 const PipelineSettings& settings);
/// Forest normalizer fitted on (x, y) and calibrated on its own out-of-bag
/// predictions, so no separate calibration split is used. With `ss_model`
/// the forest sees the SS error as an extra feature (kind SSCP), otherwise
/// kind CRF. A null predictor is the zero function.
CalibratedConformal forest_oob_fit(std::shared_ptr<const nn::Mlp> predictor,
                                   std::shared_ptr<const pretext::SsModel> ss_model, const RealMatrix& x,
                                   std::span<const double> y, const PipelineSettings& settings);
/// Two-output network trained with pinball(alpha / 2) and pinball(1 - alpha / 2).
CalibratedConformal cqr_fit(const ConformalData& data, const PipelineSettings& settings);
CalibratedConformal cqr_sscp_fit(const ConformalData& data, const PipelineSettings& settings, EncoderMode mode);

}  // namespace sscp::conformal
