#include "sscp/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "kernels.hpp"
#include "sscp/error.hpp"
#include "sscp/random.hpp"

namespace sscp::nn {

namespace {

constexpr std::uint64_t kValidationStream = 0x7a1;
constexpr std::uint64_t kShuffleStream = 0x5f1;
constexpr std::uint64_t kDropoutStream = 0xd40;

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  std::size_t step = 0;
};

void adam_update(std::vector<double>& param, const std::vector<double>& grad, std::vector<double>& m,
                 std::vector<double>& v, double lr, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

RealMatrix gather(const RealMatrix& m, std::span<const std::size_t> rows) { return m.select_rows(rows); }

}  // namespace

bool EarlyStopping::update(double loss) {
  ++epochs_;
  if (loss < best_loss_) {
    best_loss_ = loss;
    best_epoch_ = epochs_;
    return true;
  }
  return false;
}

TrainResult train_supervised(const Mlp& model, const RealMatrix& inputs, const RealMatrix& targets,
                             const Objective& objective, TrainOptions options) {
  const MlpConfig& config = model.config();
  const std::size_t n = inputs.rows();
  if (n == 0) throw EmptyInputError("no training rows");
  if (targets.rows() != n) throw ShapeError("inputs and targets have different row counts");
  if (inputs.cols() != model.input_size()) throw ShapeError("training inputs do not match network input width");
  if (targets.cols() != model.output_size() || objective.n_outputs() != model.output_size()) {
    throw ShapeError("targets/objective do not match network output width");
  }

  // Seeded validation slice.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, {kValidationStream}));
  split_rng.shuffle(std::span<std::size_t>(order));
  std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
  if (config.validation_fraction > 0.0 && n_val == 0 && n >= 2) n_val = 1;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const RealMatrix x_val = gather(inputs, val_rows);
  const RealMatrix y_val = gather(targets, val_rows);

  const std::size_t first_trainable = options.freeze_encoder ? model.encoder_boundary() : 0;

  Mlp current = model;
  auto& layers = current.mutable_layers();
  AdamState adam;
  for (const auto& layer : layers) {
    adam.m_w.emplace_back(layer.weights.size(), 0.0);
    adam.v_w.emplace_back(layer.weights.size(), 0.0);
    adam.m_b.emplace_back(layer.bias.size(), 0.0);
    adam.v_b.emplace_back(layer.bias.size(), 0.0);
  }

  Rng shuffle_rng(derive_seed(config.seed, {kShuffleStream}));
  Rng dropout_rng(derive_seed(config.seed, {kDropoutStream}));
  EarlyStopping stopper(config.patience);
  TrainResult result{current, 0, 0, {}, {}};

  detail::ForwardTrace trace;
  detail::Gradients grads;
  RealMatrix d_out;
  RealMatrix x_batch;
  RealMatrix y_batch;
  std::vector<std::size_t> batch_rows;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(train_rows));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += config.batch_size) {
      const std::size_t end = std::min(train_rows.size(), start + config.batch_size);
      batch_rows.assign(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                        train_rows.begin() + static_cast<std::ptrdiff_t>(end));
      x_batch = gather(inputs, batch_rows);
      y_batch = gather(targets, batch_rows);

      detail::forward_trace(current, x_batch, true, &dropout_rng, trace);
      const RealMatrix& pred = trace.outputs.back();
      const double batch_loss = objective.mean_loss(pred, y_batch);
      if (!std::isfinite(batch_loss)) throw DivergenceError(epoch, "non-finite training loss");
      loss_sum += batch_loss * static_cast<double>(batch_rows.size());

      objective.gradient(pred, y_batch, d_out);
      detail::backward(current, trace, d_out, first_trainable, grads);

      ++adam.step;
      const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
      const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
      for (std::size_t l = first_trainable; l < layers.size(); ++l) {
        adam_update(layers[l].weights, grads.weights[l], adam.m_w[l], adam.v_w[l], config.learning_rate, bias1, bias2);
        adam_update(layers[l].bias, grads.bias[l], adam.m_b[l], adam.v_b[l], config.learning_rate, bias1, bias2);
      }
    }
    const double train_loss = loss_sum / static_cast<double>(train_rows.size());
    const double val_loss = x_val.rows() > 0 ? objective.mean_loss(current.predict(x_val), y_val) : train_loss;
    if (!std::isfinite(val_loss)) throw DivergenceError(epoch, "non-finite validation loss");
    result.train_loss.push_back(train_loss);
    result.validation_loss.push_back(val_loss);
    result.epochs_run = epoch;
    if (stopper.update(val_loss)) {
      result.model = current;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  result.model.mark_trained();
  return result;
}

std::vector<double> parameter_gradient(const Mlp& model, const RealMatrix& inputs, const RealMatrix& targets,
                                       const Objective& objective) {
  detail::ForwardTrace trace;
  detail::forward_trace(model, inputs, false, nullptr, trace);
  RealMatrix d_out;
  objective.gradient(trace.outputs.back(), targets, d_out);
  detail::Gradients grads;
  detail::backward(model, trace, d_out, 0, grads);
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    flat.insert(flat.end(), grads.weights[l].begin(), grads.weights[l].end());
    flat.insert(flat.end(), grads.bias[l].begin(), grads.bias[l].end());
  }
  return flat;
}

double grad_check(const Mlp& model, std::span<const double> sample, std::span<const double> target,
                  const Objective& objective) {
  constexpr double kStep = 1e-5;
  const RealMatrix x(1, sample.size(), std::vector<double>(sample.begin(), sample.end()));
  const RealMatrix y(1, target.size(), std::vector<double>(target.begin(), target.end()));
  const auto analytic = parameter_gradient(model, x, y, objective);

  Mlp probe = model;
  auto loss_at = [&]() { return objective.mean_loss(probe.predict(x), y); };
  double worst = 0.0;
  std::size_t flat = 0;
  for (auto& layer : probe.mutable_layers()) {
    for (auto* params : {&layer.weights, &layer.bias}) {
      for (double& p : *params) {
        const double saved = p;
        p = saved + kStep;
        const double up = loss_at();
        p = saved - kStep;
        const double down = loss_at();
        p = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        worst = std::max(worst, std::abs(analytic[flat] - numeric) / std::max(1.0, std::abs(numeric)));
        ++flat;
      }
    }
  }
  return worst;
}

}  // namespace sscp::nn
