#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sscp/matrix.hpp"

namespace sscp::nn {

/// Elementwise training loss.
///
/// `kMaskBce` treats the prediction as a logit and the target as a {0, 1}
/// mask bit; it is the binary cross-entropy of sigmoid(pred).
class LossKind {
 public:
  enum class Type { kMse, kPinball, kMaskBce };

  static LossKind mse() noexcept { return LossKind(Type::kMse, 0.5); }
  static LossKind pinball(double tau);
  static LossKind mask_bce() noexcept { return LossKind(Type::kMaskBce, 0.5); }

  Type type() const noexcept { return type_; }
  double tau() const noexcept { return tau_; }

  double value(double pred, double target) const noexcept;
  /// Derivative of `value` with respect to `pred`. At the pinball kink the
  /// tau-side slope (-tau) is used.
  double gradient(double pred, double target) const noexcept;

  friend bool operator==(const LossKind&, const LossKind&) = default;

 private:
  LossKind(Type type, double tau) noexcept : type_(type), tau_(tau) {}

  Type type_;
  double tau_;
};

/// Mean elementwise loss. Throws EmptyInputError on empty input and
/// ShapeError on a length mismatch.
double loss_eval(const LossKind& kind, std::span<const double> pred, std::span<const double> target);

/// A loss applied to a contiguous block of output columns.
struct LossTerm {
  std::size_t first_col = 0;
  std::size_t n_cols = 1;
  LossKind kind = LossKind::mse();
  double weight = 1.0;
};

/// Per-sample objective made of weighted column blocks:
///   loss(row) = sum_t weight_t * mean_{c in block t} kind_t(pred[c], target[c])
/// and the batch loss is the mean of the per-sample losses.
class Objective {
 public:
  explicit Objective(std::vector<LossTerm> terms);

  /// The same loss on every one of `n_outputs` columns.
  static Objective uniform(LossKind kind, std::size_t n_outputs = 1);
  /// Two outputs, column 0 with pinball(tau_lo) and column 1 with pinball(tau_hi).
  static Objective quantile_pair(double tau_lo, double tau_hi);
  /// Mask logits in columns [0, n) and reconstructed features in [n, 2n):
  /// mask BCE + feature_weight * feature MSE.
  static Objective vime(std::size_t n_features, double feature_weight);

  std::size_t n_outputs() const noexcept { return n_outputs_; }
  const std::vector<LossTerm>& terms() const noexcept { return terms_; }

  double sample_loss(std::span<const double> pred, std::span<const double> target) const;
  std::vector<double> per_sample(const RealMatrix& pred, const RealMatrix& target) const;
  double mean_loss(const RealMatrix& pred, const RealMatrix& target) const;

  /// Gradient of `mean_loss` with respect to `pred`, written into `grad`
  /// (resized as needed).
  void gradient(const RealMatrix& pred, const RealMatrix& target, RealMatrix& grad) const;

 private:
  void check_shapes(const RealMatrix& pred, const RealMatrix& target) const;

  std::vector<LossTerm> terms_;
  std::size_t n_outputs_ = 0;
};

}  // namespace sscp::nn
