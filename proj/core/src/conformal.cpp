#include "sscp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sscp/error.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/train.hpp"

namespace sscp::conformal {

Interval Interval::symmetric(double center, double half_width) noexcept {
  if (std::isinf(half_width)) return {-kInfinity, kInfinity, kInfinity};
  return {center - half_width, center + half_width, 2.0 * half_width};
}

std::optional<std::size_t> quantile_index(std::size_t n_cal, double alpha) {
  if (n_cal == 0) throw EmptyInputError("calibration set is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  // The tolerance keeps products such as 100 * 0.9 from rounding up a rank.
  const double raw = static_cast<double>(n_cal + 1) * (1.0 - alpha);
  const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  if (k > n_cal) return std::nullopt;
  return std::max<std::size_t>(k, 1);
}

double critical_score(std::span<const double> scores, double alpha) {
  const auto k = quantile_index(scores.size(), alpha);
  if (!k) return kInfinity;
  std::vector<double> sorted(scores.begin(), scores.end());
  for (double s : sorted) {
    if (std::isnan(s)) throw ContractViolation("calibration score is NaN");
  }
  std::stable_sort(sorted.begin(), sorted.end());
  return sorted[*k - 1];
}

double icp_calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw EmptyInputError("calibration set is empty");
  for (double s : scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ContractViolation("calibration scores must be finite and nonnegative");
  }
  return critical_score(scores, alpha);
}

double crf_score(double y, double f_x, double sigma_x) {
  if (!(sigma_x > 0.0)) throw ContractViolation("normalizer output must be positive, got " + std::to_string(sigma_x));
  return std::abs(y - f_x) / sigma_x;
}

Interval crf_interval(double f_x, double epsilon, double sigma_x) {
  if (!(sigma_x > 0.0)) throw ContractViolation("normalizer output must be positive, got " + std::to_string(sigma_x));
  return Interval::symmetric(f_x, epsilon * sigma_x);
}

double ssl_norm_sigma(double err, double beta) { return std::max(err, 0.0) + beta; }

double cqr_score(double lower, double upper, double y) noexcept { return std::max(lower - y, y - upper); }

double cqr_calibrate(std::span<const double> lowers, std::span<const double> uppers, std::span<const double> ys,
                     double alpha) {
  if (lowers.size() != ys.size() || uppers.size() != ys.size()) {
    throw ShapeError("quantile predictions and targets have different lengths");
  }
  if (ys.empty()) throw EmptyInputError("calibration set is empty");
  std::vector<double> scores(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) scores[i] = cqr_score(lowers[i], uppers[i], ys[i]);
  return critical_score(scores, alpha);
}

Interval cqr_interval(double lower, double upper, double epsilon) {
  if (std::isinf(epsilon) && epsilon > 0) return {-kInfinity, kInfinity, kInfinity};
  const double width = (upper - lower) + 2.0 * epsilon;
  if (width < 0.0) {
    const double mid = lower + (upper - lower) / 2.0;
    return {mid, mid, 0.0};
  }
  return {lower - epsilon, upper + epsilon, width};
}

double normalizer_floor(std::span<const double> abs_residuals) {
  if (abs_residuals.empty()) return 1e-6;
  double mean = 0.0;
  for (double r : abs_residuals) mean += r;
  mean /= static_cast<double>(abs_residuals.size());
  return std::max(1e-6, 0.01 * mean);
}

Normalizer Normalizer::constant(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ContractViolation("a constant normalizer must be positive");
  return Normalizer(value, std::min(value, kSslNormFloor), false);
}

Normalizer Normalizer::from_mlp(nn::Mlp model, double floor, bool uses_ss) {
  if (!(floor > 0.0)) throw ContractViolation("normalizer floor must be positive");
  return Normalizer(std::make_shared<const nn::Mlp>(std::move(model)), floor, uses_ss);
}

Normalizer Normalizer::from_forest(forest::Forest model, double floor, bool uses_ss) {
  if (!(floor > 0.0)) throw ContractViolation("normalizer floor must be positive");
  return Normalizer(std::make_shared<const forest::Forest>(std::move(model)), floor, uses_ss);
}

std::vector<double> Normalizer::predict_raw(const RealMatrix& features) const {
  if (const auto* c = std::get_if<double>(&model_)) return std::vector<double>(features.rows(), *c);
  if (const auto* m = std::get_if<std::shared_ptr<const nn::Mlp>>(&model_)) {
    const RealMatrix out = (*m)->predict(features);
    return out.column(0);
  }
  return std::get<std::shared_ptr<const forest::Forest>>(model_)->predict(features);
}

std::vector<double> Normalizer::predict(const RealMatrix& features) const {
  auto out = predict_raw(features);
  for (double& v : out) {
    // NaN fails the comparison and is replaced by the floor as well.
    v = (v > floor_ ? v : floor_) * scale_;
  }
  return out;
}

Normalizer Normalizer::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ContractViolation("normalizer scale must be positive");
  Normalizer copy = *this;
  copy.scale_ *= factor;
  return copy;
}

const forest::Forest* Normalizer::forest() const noexcept {
  const auto* f = std::get_if<std::shared_ptr<const forest::Forest>>(&model_);
  return f ? f->get() : nullptr;
}

const nn::Mlp* Normalizer::mlp() const noexcept {
  const auto* m = std::get_if<std::shared_ptr<const nn::Mlp>>(&model_);
  return m ? m->get() : nullptr;
}

Normalizer train_normalizer(const RealMatrix& features, std::span<const double> abs_residuals,
                            const NormalizerSettings& settings) {
  if (features.rows() != abs_residuals.size()) throw ShapeError("one residual target per feature row is required");
  if (features.rows() == 0) throw EmptyInputError("no rows to train the normalizer on");
  for (double r : abs_residuals) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ContractViolation("normalizer targets must be finite and nonnegative");
  }
  if (settings.use_ss && features.cols() < 2) throw ShapeError("SS-augmented features need at least two columns");
  const double floor = normalizer_floor(abs_residuals);

  if (settings.backend == NormalizerBackend::kForest) {
    auto model = forest::Forest::fit(features, abs_residuals, settings.forest);
    return Normalizer::from_forest(std::move(model), floor, settings.use_ss);
  }

  const std::size_t base_inputs = settings.use_ss ? features.cols() - 1 : features.cols();
  nn::MlpConfig config = settings.mlp;
  config.layer_sizes.front() = base_inputs;
  config.layer_sizes.back() = 1;
  nn::Mlp init = nn::Mlp::init(config);
  if (settings.use_ss) init = init.with_extra_input(settings.extra_input_seed);
  auto result = nn::train_supervised(init, features, RealMatrix::column_vector(abs_residuals),
                                     nn::Objective::uniform(nn::LossKind::mse()));
  return Normalizer::from_mlp(std::move(result.model), floor, settings.use_ss);
}

}  // namespace sscp::conformal
