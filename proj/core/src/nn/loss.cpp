#include "sscp/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sscp/error.hpp"

namespace sscp::nn {

LossKind LossKind::pinball(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("pinball tau must lie strictly inside (0, 1), got " + std::to_string(tau));
  }
  return LossKind(Type::kPinball, tau);
}

double LossKind::value(double pred, double target) const noexcept {
  switch (type_) {
    case Type::kMse: {
      const double d = pred - target;
      return d * d;
    }
    case Type::kPinball: {
      const double u = target - pred;
      return std::max(tau_ * u, (tau_ - 1.0) * u);
    }
    case Type::kMaskBce:
      // softplus(z) - t*z, written to stay finite for large |z|.
      return std::max(pred, 0.0) - target * pred + std::log1p(std::exp(-std::abs(pred)));
  }
  return 0.0;
}

double LossKind::gradient(double pred, double target) const noexcept {
  switch (type_) {
    case Type::kMse:
      return 2.0 * (pred - target);
    case Type::kPinball:
      return target - pred >= 0.0 ? -tau_ : 1.0 - tau_;
    case Type::kMaskBce: {
      const double sig = pred >= 0.0 ? 1.0 / (1.0 + std::exp(-pred))
                                     : std::exp(pred) / (1.0 + std::exp(pred));
      return sig - target;
    }
  }
  return 0.0;
}

double loss_eval(const LossKind& kind, std::span<const double> pred, std::span<const double> target) {
  if (pred.empty()) throw EmptyInputError("loss_eval on empty input");
  if (pred.size() != target.size()) throw ShapeError("loss_eval length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += kind.value(pred[i], target[i]);
  return sum / static_cast<double>(pred.size());
}

Objective::Objective(std::vector<LossTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw ConfigError("objective needs at least one loss term");
  for (const auto& t : terms_) {
    if (t.n_cols == 0) throw ConfigError("loss term covers no columns");
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) throw ConfigError("loss weight must be finite and >= 0");
    n_outputs_ = std::max(n_outputs_, t.first_col + t.n_cols);
  }
}

Objective Objective::uniform(LossKind kind, std::size_t n_outputs) {
  return Objective({LossTerm{0, n_outputs, kind, 1.0}});
}

Objective Objective::quantile_pair(double tau_lo, double tau_hi) {
  // Each term averages over one column, so halve the weights to keep the
  // per-sample loss a mean over both outputs.
  return Objective({LossTerm{0, 1, LossKind::pinball(tau_lo), 0.5},
                    LossTerm{1, 1, LossKind::pinball(tau_hi), 0.5}});
}

Objective Objective::vime(std::size_t n_features, double feature_weight) {
  return Objective({LossTerm{0, n_features, LossKind::mask_bce(), 1.0},
                    LossTerm{n_features, n_features, LossKind::mse(), feature_weight}});
}

void Objective::check_shapes(const RealMatrix& pred, const RealMatrix& target) const {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("prediction and target shapes differ");
  }
  if (pred.cols() != n_outputs_) {
    throw ShapeError("objective expects " + std::to_string(n_outputs_) + " outputs, got " +
                     std::to_string(pred.cols()));
  }
}

double Objective::sample_loss(std::span<const double> pred, std::span<const double> target) const {
  if (pred.size() != n_outputs_ || target.size() != n_outputs_) {
    throw ShapeError("sample width does not match objective");
  }
  double total = 0.0;
  for (const auto& t : terms_) {
    double sum = 0.0;
    for (std::size_t c = t.first_col; c < t.first_col + t.n_cols; ++c) {
      sum += t.kind.value(pred[c], target[c]);
    }
    total += t.weight * sum / static_cast<double>(t.n_cols);
  }
  return total;
}

std::vector<double> Objective::per_sample(const RealMatrix& pred, const RealMatrix& target) const {
  check_shapes(pred, target);
  std::vector<double> out(pred.rows());
  for (std::size_t r = 0; r < pred.rows(); ++r) out[r] = sample_loss(pred.row(r), target.row(r));
  return out;
}

double Objective::mean_loss(const RealMatrix& pred, const RealMatrix& target) const {
  if (pred.rows() == 0) throw EmptyInputError("mean loss of an empty batch");
  const auto losses = per_sample(pred, target);
  double sum = 0.0;
  for (double v : losses) sum += v;
  return sum / static_cast<double>(losses.size());
}

void Objective::gradient(const RealMatrix& pred, const RealMatrix& target, RealMatrix& grad) const {
  check_shapes(pred, target);
  if (grad.rows() != pred.rows() || grad.cols() != pred.cols()) grad = RealMatrix(pred.rows(), pred.cols());
  const double inv_rows = 1.0 / static_cast<double>(pred.rows());
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    const auto p = pred.row(r);
    const auto y = target.row(r);
    auto g = grad.row(r);
    std::fill(g.begin(), g.end(), 0.0);
    for (const auto& t : terms_) {
      const double scale = t.weight * inv_rows / static_cast<double>(t.n_cols);
      for (std::size_t c = t.first_col; c < t.first_col + t.n_cols; ++c) {
        g[c] += scale * t.kind.gradient(p[c], y[c]);
      }
    }
  }
}

}  // namespace sscp::nn
