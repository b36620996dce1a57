#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sscp/matrix.hpp"
#include "sscp/random.hpp"

namespace sscp::nn {

enum class Activation { kRelu, kIdentity };

/// Architecture and optimisation settings of a dense network. Defaults are
/// the predictive-model settings: 64-unit hidden layers, Adam at 5e-4,
/// batches of 128, dropout 0.1 and early stopping with patience 20.
struct MlpConfig {
  /// Input width, hidden widths..., output width.
  std::vector<std::size_t> layer_sizes;
  /// Activation per hidden layer; empty means ReLU on every hidden layer.
  /// The output layer is always linear.
  std::vector<Activation> hidden_activations;
  /// Number of leading weight layers forming the encoder. 0 selects all but
  /// the last layer.
  std::size_t encoder_boundary = 0;

  double dropout_rate = 0.1;
  double learning_rate = 5e-4;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  /// Share of the training rows held out (seeded) for early stopping.
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  /// `n_inputs` -> hidden widths -> `n_outputs`.
  static MlpConfig dense(std::size_t n_inputs, std::vector<std::size_t> hidden, std::size_t n_outputs);
  /// The three-layer 64-64 regressor used for predictors and normalizers.
  static MlpConfig regressor(std::size_t n_inputs, std::size_t n_outputs = 1);

  std::size_t n_layers() const noexcept { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  std::size_t resolved_encoder_boundary() const noexcept;

  /// Throws ConfigError when any invariant fails.
  void validate() const;
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // inputs x outputs, row-major
  std::vector<double> bias;
  Activation activation = Activation::kIdentity;

  double weight(std::size_t in, std::size_t out) const noexcept { return weights[in * outputs + out]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward network f = head(encoder(x)). The first
/// `encoder_boundary()` layers form the encoder.
class Mlp {
 public:
  Mlp(MlpConfig config, std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases; deterministic in `seed`.
  static Mlp init(const MlpConfig& config, std::uint64_t seed);
  static Mlp init(const MlpConfig& config) { return init(config, config.seed); }

  const MlpConfig& config() const noexcept { return config_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

  std::size_t input_size() const noexcept { return layers_.front().inputs; }
  std::size_t output_size() const noexcept { return layers_.back().outputs; }
  std::size_t encoder_boundary() const noexcept { return encoder_boundary_; }
  std::size_t encoder_output_size() const noexcept;
  std::size_t parameter_count() const noexcept;

  /// Dropout (inverted scaling) is applied to hidden-layer outputs only when
  /// `train_mode` is set; `rng` supplies the masks.
  RealMatrix forward(const RealMatrix& batch, bool train_mode, Rng& rng) const;
  /// Eval-mode forward pass.
  RealMatrix predict(const RealMatrix& batch) const;
  /// Eval-mode output of the encoder layers.
  RealMatrix encode(const RealMatrix& batch) const;

  /// Copy of layers [first, last) as a standalone network.
  Mlp layer_range(std::size_t first, std::size_t last) const;

  /// Same network with one more input appended after the existing ones.
  /// Existing weights are untouched; the new input's weights are drawn from
  /// `seed` with the first layer's Glorot limit. A constant-zero extra input
  /// therefore leaves every output and gradient bit-identical.
  Mlp with_extra_input(std::uint64_t seed) const;

  bool trained() const noexcept { return trained_; }
  void mark_trained() noexcept { trained_ = true; }

  friend bool operator==(const Mlp& a, const Mlp& b) { return a.layers_ == b.layers_; }

 private:
  MlpConfig config_;
  std::vector<DenseLayer> layers_;
  std::size_t encoder_boundary_ = 0;
  bool trained_ = false;
};

/// Glorot-uniform limit sqrt(6 / (fan_in + fan_out)).
double glorot_limit(std::size_t fan_in, std::size_t fan_out) noexcept;

}  // namespace sscp::nn
