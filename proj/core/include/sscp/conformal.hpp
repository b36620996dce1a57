#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sscp/forest.hpp"
#include "sscp/matrix.hpp"
#include "sscp/nn/mlp.hpp"

namespace sscp::conformal {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
/// Offset added to raw self-supervised errors when they are used directly as
/// the normalizer.
inline constexpr double kSslNormFloor = 1e-6;

/// Closed interval [lower, upper]. The width is kept from the construction
/// parameters (2 eps sigma for symmetric intervals) rather than recomputed
/// as upper - lower, so equal nominal widths compare equal exactly.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double nominal_width = 0.0;

  static Interval from_bounds(double lower, double upper) noexcept { return {lower, upper, upper - lower}; }
  static Interval symmetric(double center, double half_width) noexcept;

  double width() const noexcept { return nominal_width; }
  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// 1-based rank ceil((n + 1)(1 - alpha)) of the critical score, or nullopt
/// when it exceeds n. Throws EmptyInputError for n = 0 and ConfigError for
/// alpha outside (0, 1).
std::optional<std::size_t> quantile_index(std::size_t n_cal, double alpha);

/// Order statistic of `scores` at quantile_index, +inf on overflow. Scores
/// may be negative (CQR).
double critical_score(std::span<const double> scores, double alpha);

/// critical_score for nonnegative, finite scores.
double icp_calibrate(std::span<const double> scores, double alpha);

/// |y - f| / sigma. Throws ContractViolation unless sigma > 0.
double crf_score(double y, double f_x, double sigma_x);

/// [f - eps sigma, f + eps sigma]; the whole line when eps is +inf.
Interval crf_interval(double f_x, double epsilon, double sigma_x);

/// err + beta.
double ssl_norm_sigma(double err, double beta = kSslNormFloor);

/// max(lower - y, y - upper).
double cqr_score(double lower, double upper, double y) noexcept;

/// Critical score of CQR conformity scores; may be negative.
double cqr_calibrate(std::span<const double> lowers, std::span<const double> uppers, std::span<const double> ys,
                     double alpha);

/// [lower - eps, upper + eps]. When a negative eps would cross the ends, the
/// interval collapses to the midpoint.
Interval cqr_interval(double lower, double upper, double epsilon);

/// Positivity floor max(1e-6, 0.01 * mean(targets)).
double normalizer_floor(std::span<const double> abs_residuals);

enum class NormalizerBackend { kMlp, kForest };

/// Settings for training a residual model sigma.
struct NormalizerSettings {
  NormalizerBackend backend = NormalizerBackend::kMlp;
  /// Architecture and optimiser for the MLP backend; layer sizes are filled
  /// in from the features.
  nn::MlpConfig mlp = nn::MlpConfig::regressor(1);
  forest::ForestConfig forest;
  /// The last feature column is the self-supervised error. For the MLP
  /// backend the network is the no-SS initialisation widened by one input,
  /// so a constant-zero error column reproduces the no-SS model exactly.
  bool use_ss = false;
  /// Seed for the extra input's weights.
  std::uint64_t extra_input_seed = 0;
};

/// Model of absolute residuals, floored at a positive beta and optionally
/// rescaled by a constant.
class Normalizer {
 public:
  static Normalizer constant(double value);
  static Normalizer from_mlp(nn::Mlp model, double floor, bool uses_ss);
  static Normalizer from_forest(forest::Forest model, double floor, bool uses_ss);

  /// max(raw, floor) * scale per row.
  std::vector<double> predict(const RealMatrix& features) const;
  /// Unfloored, unscaled model output.
  std::vector<double> predict_raw(const RealMatrix& features) const;
  /// Same model with every output multiplied by `factor` > 0.
  Normalizer scaled(double factor) const;

  double floor() const noexcept { return floor_; }
  double scale() const noexcept { return scale_; }
  bool uses_ss() const noexcept { return uses_ss_; }
  const forest::Forest* forest() const noexcept;
  const nn::Mlp* mlp() const noexcept;

 private:
  using Model = std::variant<double, std::shared_ptr<const nn::Mlp>, std::shared_ptr<const forest::Forest>>;
  Normalizer(Model model, double floor, bool uses_ss) : model_(std::move(model)), floor_(floor), uses_ss_(uses_ss) {}

  Model model_;
  double floor_ = kSslNormFloor;
  double scale_ = 1.0;
  bool uses_ss_ = false;
};

/// Fits sigma on (features, |residual|). Throws ContractViolation on a
/// negative or non-finite target.
Normalizer train_normalizer(const RealMatrix& features, std::span<const double> abs_residuals,
                            const NormalizerSettings& settings);

}  // namespace sscp::conformal
