#include "sscp/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "sscp/error.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/train.hpp"
#include "sscp/random.hpp"

namespace sscp::conformal {

namespace {

// Seed streams per pipeline stage. Methods that must agree under the
// zero-SS ablation share a stream.
constexpr std::uint64_t kPredictorStream = 0x1;
constexpr std::uint64_t kPretextStream = 0x2;
constexpr std::uint64_t kNormalizerStream = 0x3;
constexpr std::uint64_t kQuantileStream = 0x4;
constexpr std::uint64_t kIndependentPretextStream = 0x5;
constexpr std::uint64_t kSharedPretextStream = 0x6;
constexpr std::uint64_t kForestStream = 0x7;

constexpr std::array<std::pair<Kind, std::string_view>, 6> kKindNames{{
    {Kind::kIcp, "ICP"},
    {Kind::kCrf, "CRF"},
    {Kind::kSscp, "SSCP"},
    {Kind::kSslNorm, "SSL_NORM"},
    {Kind::kCqr, "CQR"},
    {Kind::kCqrSscp, "CQR_SSCP"},
}};

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool uses_quantiles(Kind kind) { return kind == Kind::kCqr || kind == Kind::kCqrSscp; }

RealMatrix with_zero_column(const RealMatrix& x) { return x.append_column(std::vector<double>(x.rows(), 0.0)); }

/// (lower, upper) per row with crossed heads swapped. Returns the number of
/// swapped rows.
std::size_t quantile_bounds(const RealMatrix& q, std::vector<double>& lo, std::vector<double>& hi) {
  lo.resize(q.rows());
  hi.resize(q.rows());
  std::size_t crossed = 0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double a = q(i, 0);
    double b = q(i, 1);
    if (a > b) {
      std::swap(a, b);
      ++crossed;
    }
    lo[i] = a;
    hi[i] = b;
  }
  return crossed;
}

pretext::PretextSettings pretext_settings_for(const PipelineSettings& settings, std::uint64_t stream) {
  pretext::PretextSettings s = settings.pretext_settings;
  s.seed = derive_seed(settings.seed, {stream});
  return s;
}

nn::Mlp train_quantile_model(const nn::Mlp& init, const RealMatrix& inputs, std::span<const double> y,
                             double alpha) {
  const auto result = nn::train_supervised(init, inputs, RealMatrix::column_vector(y).append_column(y),
                                           nn::Objective::quantile_pair(alpha / 2.0, 1.0 - alpha / 2.0));
  return result.model;
}

}  // namespace

std::string_view to_string(Kind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<Kind> kind_from_string(std::string_view text) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

void ConformalData::validate(bool needs_res) const {
  const std::size_t d = x_train.cols();
  if (x_train.rows() == 0) throw EmptyInputError("no labeled training rows");
  if (x_cal.rows() == 0) throw EmptyInputError("calibration set is empty");
  if (needs_res && x_res.rows() == 0) throw EmptyInputError("residual set is empty");
  if (x_train.rows() != y_train.size() || x_res.rows() != y_res.size() || x_cal.rows() != y_cal.size()) {
    throw ShapeError("feature and target row counts differ");
  }
  if (x_cal.cols() != d || (x_res.rows() > 0 && x_res.cols() != d) ||
      (x_unlabeled.rows() > 0 && x_unlabeled.cols() != d)) {
    throw ShapeError("splits have different feature counts");
  }
}

RealMatrix ConformalData::pretext_rows(bool include_unlabeled) const {
  if (!include_unlabeled || x_unlabeled.rows() == 0) return x_train;
  return x_train.vstack(x_unlabeled);
}

nn::MlpConfig network_config(const nn::MlpConfig& base, std::size_t n_inputs, std::size_t n_outputs,
                             std::uint64_t seed) {
  nn::MlpConfig config = base;
  if (config.layer_sizes.size() < 2) config.layer_sizes = {n_inputs, n_outputs};
  config.layer_sizes.front() = n_inputs;
  config.layer_sizes.back() = n_outputs;
  config.seed = seed;
  return config;
}

std::vector<double> CalibratedConformal::ss_errors(const RealMatrix& x) const {
  if (!ss_model || zero_ss_feature) return std::vector<double>(x.rows(), ss_model ? 0.0 : kNan);
  return ss_model->ss_errors(ss_placeholder ? with_zero_column(x) : x);
}

std::vector<double> CalibratedConformal::point_predictions(const RealMatrix& x) const {
  if (!model) return std::vector<double>(x.rows(), 0.0);
  return model->predict(x).column(0);
}

std::vector<double> CalibratedConformal::sigma_values(const RealMatrix& x, std::span<const double> errs) const {
  std::vector<double> out(x.rows(), 1.0);
  switch (kind) {
    case Kind::kIcp:
      break;
    case Kind::kCrf:
      out = sigma->predict(x);
      break;
    case Kind::kSscp:
      out = sigma->predict(pretext::augment_features(x, errs));
      break;
    case Kind::kSslNorm:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = ssl_norm_sigma(errs[i]);
      break;
    default:
      std::fill(out.begin(), out.end(), kNan);
      return out;
  }
  for (double& v : out) v *= sigma_scale;
  return out;
}

void CalibratedConformal::calibrate(const RealMatrix& x_cal, std::span<const double> y_cal) {
  if (x_cal.rows() != y_cal.size()) throw ShapeError("calibration features and targets differ in length");
  if (x_cal.rows() == 0) throw EmptyInputError("calibration set is empty");
  const auto errs = ss_errors(x_cal);
  calibration_scores.assign(y_cal.size(), 0.0);
  if (uses_quantiles(kind)) {
    const RealMatrix inputs = kind == Kind::kCqrSscp ? pretext::augment_features(x_cal, errs) : x_cal;
    std::vector<double> lo;
    std::vector<double> hi;
    const std::size_t crossed = quantile_bounds(model->predict(inputs), lo, hi);
    crossing_rate = static_cast<double>(crossed) / static_cast<double>(y_cal.size());
    for (std::size_t i = 0; i < y_cal.size(); ++i) calibration_scores[i] = cqr_score(lo[i], hi[i], y_cal[i]);
    epsilon = critical_score(calibration_scores, alpha);
    return;
  }
  const auto f = point_predictions(x_cal);
  const auto s = sigma_values(x_cal, errs);
  for (std::size_t i = 0; i < y_cal.size(); ++i) calibration_scores[i] = crf_score(y_cal[i], f[i], s[i]);
  epsilon = icp_calibrate(calibration_scores, alpha);
}

Prediction CalibratedConformal::predict(const RealMatrix& x) const {
  Prediction out;
  out.ss_error = ss_errors(x);
  out.intervals.resize(x.rows());
  if (uses_quantiles(kind)) {
    const RealMatrix inputs = kind == Kind::kCqrSscp ? pretext::augment_features(x, out.ss_error) : x;
    std::vector<double> lo;
    std::vector<double> hi;
    quantile_bounds(model->predict(inputs), lo, hi);
    out.point.resize(x.rows());
    out.sigma.assign(x.rows(), kNan);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out.intervals[i] = cqr_interval(lo[i], hi[i], epsilon);
      out.point[i] = lo[i] + (hi[i] - lo[i]) / 2.0;
    }
    return out;
  }
  out.point = point_predictions(x);
  out.sigma = sigma_values(x, out.ss_error);
  for (std::size_t i = 0; i < x.rows(); ++i) out.intervals[i] = crf_interval(out.point[i], epsilon, out.sigma[i]);
  return out;
}

CalibratedConformal CalibratedConformal::with_scaled_sigma(double factor, const RealMatrix& x_cal,
                                                           std::span<const double> y_cal) const {
  if (uses_quantiles(kind)) throw ContractViolation("quantile predictors have no normalizer to scale");
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ContractViolation("sigma scale must be positive");
  CalibratedConformal copy = *this;
  copy.sigma_scale *= factor;
  copy.calibrate(x_cal, y_cal);
  return copy;
}

CalibratedConformal calibrate_with(CalibratedConformal predictor, const RealMatrix& x_cal,
                                   std::span<const double> y_cal) {
  predictor.calibrate(x_cal, y_cal);
  return predictor;
}

nn::Mlp train_predictor(const ConformalData& data, const PipelineSettings& settings) {
  data.validate(false);
  const auto config =
      network_config(settings.network, data.n_features(), 1, derive_seed(settings.seed, {kPredictorStream}));
  auto result = nn::train_supervised(nn::Mlp::init(config), data.x_train, RealMatrix::column_vector(data.y_train),
                                     nn::Objective::uniform(nn::LossKind::mse()));
  return result.model;
}

pretext::SsModel train_pretext_on(const nn::Mlp& predictor, const RealMatrix& rows,
                                  const PipelineSettings& settings) {
  return pretext::SsModel::train(pretext::FrozenEncoder::from_model(predictor), settings.pretext, rows,
                                 pretext_settings_for(settings, kPretextStream));
}

CalibratedConformal icp_fit(std::shared_ptr<const nn::Mlp> predictor, const ConformalData& data,
                            const PipelineSettings& settings) {
  CalibratedConformal out;
  out.kind = Kind::kIcp;
  out.alpha = settings.alpha;
  out.model = std::move(predictor);
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

namespace {

/// sigma on D_res (or D_train when double dipping) with targets |y - f(x)|.
Normalizer fit_normalizer(const nn::Mlp* predictor, const ConformalData& data, const PipelineSettings& settings,
                          const pretext::SsModel* ss_model, bool placeholder) {
  const RealMatrix& x = settings.double_dip ? data.x_train : data.x_res;
  const std::vector<double>& y = settings.double_dip ? data.y_train : data.y_res;
  if (x.rows() == 0) throw EmptyInputError("no rows to train the normalizer on");
  std::vector<double> targets(y.size());
  const std::vector<double> f = predictor ? predictor->predict(x).column(0) : std::vector<double>(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) targets[i] = std::abs(y[i] - f[i]);

  NormalizerSettings ns;
  ns.backend = settings.normalizer_backend;
  ns.mlp = network_config(settings.network, data.n_features(), 1, derive_seed(settings.seed, {kNormalizerStream}));
  ns.forest = settings.forest;
  ns.forest.seed = derive_seed(settings.seed, {kForestStream});
  ns.use_ss = ss_model != nullptr;
  ns.extra_input_seed = derive_seed(settings.seed, {kNormalizerStream, 1});
  if (!ss_model) return train_normalizer(x, targets, ns);
  std::vector<double> errs(x.rows(), 0.0);
  if (!settings.zero_ss_feature) errs = ss_model->ss_errors(placeholder ? with_zero_column(x) : x);
  return train_normalizer(pretext::augment_features(x, errs), targets, ns);
}

}  // namespace

CalibratedConformal crf_fit(std::shared_ptr<const nn::Mlp> predictor, const ConformalData& data,
                            const PipelineSettings& settings) {
  data.validate(!settings.double_dip);
  CalibratedConformal out;
  out.kind = Kind::kCrf;
  out.alpha = settings.alpha;
  out.sigma = fit_normalizer(predictor.get(), data, settings, nullptr, false);
  out.model = std::move(predictor);
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

CalibratedConformal sscp_fit(std::shared_ptr<const nn::Mlp> predictor,
                             std::shared_ptr<const pretext::SsModel> ss_model, const ConformalData& data,
                             const PipelineSettings& settings) {
  data.validate(!settings.double_dip);
  if (!ss_model) throw ContractViolation("SSCP needs a trained pretext model");
  CalibratedConformal out;
  out.kind = Kind::kSscp;
  out.alpha = settings.alpha;
  out.zero_ss_feature = settings.zero_ss_feature;
  out.sigma = fit_normalizer(predictor.get(), data, settings, ss_model.get(), false);
  out.model = std::move(predictor);
  out.ss_model = std::move(ss_model);
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

CalibratedConformal sscp_fit(const ConformalData& data, const PipelineSettings& settings) {
  auto predictor = std::make_shared<const nn::Mlp>(train_predictor(data, settings));
  auto ss_model = std::make_shared<const pretext::SsModel>(
      train_pretext_on(*predictor, data.pretext_rows(settings.include_unlabeled), settings));
  return sscp_fit(std::move(predictor), std::move(ss_model), data, settings);
}

CalibratedConformal ssl_norm_fit(std::shared_ptr<const nn::Mlp> predictor,
                                 std::shared_ptr<const pretext::SsModel> ss_model, const ConformalData& data,
                                 const PipelineSettings& settings) {
  data.validate(false);
  if (!ss_model) throw ContractViolation("the SSL normalizer needs a trained pretext model");
  CalibratedConformal out;
  out.kind = Kind::kSslNorm;
  out.alpha = settings.alpha;
  out.zero_ss_feature = settings.zero_ss_feature;
  out.model = std::move(predictor);
  out.ss_model = std::move(ss_model);
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

CalibratedConformal forest_oob_fit(std::shared_ptr<const nn::Mlp> predictor,
                                   std::shared_ptr<const pretext::SsModel> ss_model, const RealMatrix& x,
                                   std::span<const double> y, const PipelineSettings& settings) {
  if (x.rows() != y.size()) throw ShapeError("feature and target row counts differ");
  if (x.rows() < 2) throw InsufficientDataError("out-of-bag calibration needs at least two rows");
  CalibratedConformal out;
  out.kind = ss_model ? Kind::kSscp : Kind::kCrf;
  out.alpha = settings.alpha;
  out.zero_ss_feature = settings.zero_ss_feature;
  out.model = std::move(predictor);
  out.ss_model = std::move(ss_model);

  const auto f = out.point_predictions(x);
  std::vector<double> targets(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) targets[i] = std::abs(y[i] - f[i]);
  const RealMatrix features = out.ss_model ? pretext::augment_features(x, out.ss_errors(x)) : x;
  forest::ForestConfig fc = settings.forest;
  fc.seed = derive_seed(settings.seed, {kForestStream});
  auto forest = forest::Forest::fit(features, targets, fc);
  const auto oob = forest.oob_predict(features);
  const double floor = normalizer_floor(targets);
  out.calibration_scores.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.calibration_scores[i] = crf_score(y[i], f[i], std::max(oob.values[i], floor));
  }
  out.epsilon = icp_calibrate(out.calibration_scores, settings.alpha);
  out.sigma = Normalizer::from_forest(std::move(forest), floor, out.ss_model != nullptr);
  return out;
}

CalibratedConformal cqr_fit(const ConformalData& data, const PipelineSettings& settings) {
  data.validate(false);
  const auto config =
      network_config(settings.network, data.n_features(), 2, derive_seed(settings.seed, {kQuantileStream}));
  CalibratedConformal out;
  out.kind = Kind::kCqr;
  out.alpha = settings.alpha;
  out.model = std::make_shared<const nn::Mlp>(
      train_quantile_model(nn::Mlp::init(config), data.x_train, data.y_train, settings.alpha));
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

CalibratedConformal cqr_sscp_fit(const ConformalData& data, const PipelineSettings& settings, EncoderMode mode) {
  data.validate(false);
  const std::size_t d = data.n_features();
  const RealMatrix rows = data.pretext_rows(settings.include_unlabeled);
  const auto base_config = network_config(settings.network, d, 2, derive_seed(settings.seed, {kQuantileStream}));

  CalibratedConformal out;
  out.kind = Kind::kCqrSscp;
  out.alpha = settings.alpha;
  out.zero_ss_feature = settings.zero_ss_feature;

  nn::Mlp init = nn::Mlp::init(base_config).with_extra_input(derive_seed(settings.seed, {kQuantileStream, 1}));
  if (mode == EncoderMode::kIndependent) {
    out.ss_model = std::make_shared<const pretext::SsModel>(
        pretext::SsModel::train(pretext::FrozenEncoder::identity(d), settings.pretext, rows,
                                pretext_settings_for(settings, kIndependentPretextStream)));
  } else {
    // One encoder over [x, slot]; the slot holds 0 during pretext training
    // and the SS error afterwards.
    auto ps = pretext_settings_for(settings, kSharedPretextStream);
    const auto& sizes = base_config.layer_sizes;
    ps.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
    ps.hidden_activations = base_config.hidden_activations;
    ps.head_encoder_boundary = base_config.resolved_encoder_boundary();
    out.ss_model = std::make_shared<const pretext::SsModel>(pretext::SsModel::train(
        pretext::FrozenEncoder::identity(d + 1), settings.pretext, with_zero_column(rows), ps));
    out.ss_placeholder = true;
    const auto& shared = out.ss_model->head().layers();
    auto& layers = init.mutable_layers();
    for (std::size_t l = 0; l < ps.head_encoder_boundary; ++l) layers[l] = shared[l];
  }
  const auto train_errs = out.ss_errors(data.x_train);
  out.model = std::make_shared<const nn::Mlp>(
      train_quantile_model(init, pretext::augment_features(data.x_train, train_errs), data.y_train, settings.alpha));
  return calibrate_with(std::move(out), data.x_cal, data.y_cal);
}

}  // namespace sscp::conformal
