#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "sscp/matrix.hpp"
#include "sscp/nn/loss.hpp"
#include "sscp/nn/mlp.hpp"

namespace sscp::nn {

/// Patience-based early stopping on a validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the loss of the next epoch (1-based). Returns true when it is
  /// a strict improvement on the best loss so far.
  bool update(double loss);

  bool should_stop() const noexcept { return epochs_ - best_epoch_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }
  std::size_t epochs() const noexcept { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

struct TrainOptions {
  /// Keep the encoder layers bit-identical and train only the head.
  bool freeze_encoder = false;
};

struct TrainResult {
  Mlp model;
  std::size_t epochs_run = 0;
  /// Epoch whose weights were returned.
  std::size_t best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
};

/// Minibatch Adam (beta1 0.9, beta2 0.999, eps 1e-8) with a seeded shuffle,
/// dropout, and early stopping on a seeded validation slice. Returns the
/// best-validation weights. Throws DivergenceError on a non-finite loss.
TrainResult train_supervised(const Mlp& model, const RealMatrix& inputs, const RealMatrix& targets,
                             const Objective& objective, TrainOptions options = {});

/// Full-batch eval-mode gradient of `objective.mean_loss` with respect to
/// every parameter, flattened layer by layer as (weights, bias).
std::vector<double> parameter_gradient(const Mlp& model, const RealMatrix& inputs, const RealMatrix& targets,
                                       const Objective& objective);

/// Largest |analytic - numeric| / max(1, |numeric|) over all parameters,
/// with central differences of step 1e-5.
double grad_check(const Mlp& model, std::span<const double> sample, std::span<const double> target,
                  const Objective& objective);

}  // namespace sscp::nn
