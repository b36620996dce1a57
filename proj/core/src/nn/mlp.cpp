#include "sscp/nn/mlp.hpp"

#include <cmath>
#include <string>

#include "kernels.hpp"
#include "sscp/error.hpp"

namespace sscp::nn {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;

}  // namespace

double glorot_limit(std::size_t fan_in, std::size_t fan_out) noexcept {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

MlpConfig MlpConfig::dense(std::size_t n_inputs, std::vector<std::size_t> hidden, std::size_t n_outputs) {
  MlpConfig config;
  config.layer_sizes.push_back(n_inputs);
  config.layer_sizes.insert(config.layer_sizes.end(), hidden.begin(), hidden.end());
  config.layer_sizes.push_back(n_outputs);
  return config;
}

MlpConfig MlpConfig::regressor(std::size_t n_inputs, std::size_t n_outputs) {
  return dense(n_inputs, {64, 64}, n_outputs);
}

std::size_t MlpConfig::resolved_encoder_boundary() const noexcept {
  if (encoder_boundary != 0) return encoder_boundary;
  return n_layers() == 0 ? 0 : n_layers() - 1;
}

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("an MLP needs at least an input and an output layer size, got " +
                      std::to_string(layer_sizes.size()));
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }
  if (!hidden_activations.empty() && hidden_activations.size() != n_layers() - 1) {
    throw ConfigError("hidden_activations must list one activation per hidden layer");
  }
  const std::size_t boundary = resolved_encoder_boundary();
  if (n_layers() >= 2 && (boundary < 1 || boundary > n_layers() - 1)) {
    throw ConfigError("encoder boundary must lie in [1, n_layers - 1]");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

Mlp::Mlp(MlpConfig config, std::vector<DenseLayer> layers)
    : config_(std::move(config)), layers_(std::move(layers)) {
  config_.validate();
  if (layers_.size() != config_.n_layers()) throw ShapeError("layer count does not match config");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.inputs != config_.layer_sizes[l] || layer.outputs != config_.layer_sizes[l + 1] ||
        layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs) {
      throw ShapeError("layer " + std::to_string(l) + " dimensions are inconsistent");
    }
  }
  encoder_boundary_ = config_.resolved_encoder_boundary();
}

Mlp Mlp::init(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, {kInitStream}));
  std::vector<DenseLayer> layers;
  const std::size_t n_layers = config.n_layers();
  layers.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    DenseLayer layer;
    layer.inputs = config.layer_sizes[l];
    layer.outputs = config.layer_sizes[l + 1];
    const double limit = glorot_limit(layer.inputs, layer.outputs);
    layer.weights.resize(layer.inputs * layer.outputs);
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(layer.outputs, 0.0);
    if (l + 1 == n_layers) {
      layer.activation = Activation::kIdentity;
    } else {
      layer.activation = config.hidden_activations.empty() ? Activation::kRelu : config.hidden_activations[l];
    }
    layers.push_back(std::move(layer));
  }
  return Mlp(config, std::move(layers));
}

std::size_t Mlp::encoder_output_size() const noexcept {
  return encoder_boundary_ == 0 ? input_size() : layers_[encoder_boundary_ - 1].outputs;
}

std::size_t Mlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

RealMatrix Mlp::forward(const RealMatrix& batch, bool train_mode, Rng& rng) const {
  if (batch.cols() != input_size()) {
    throw ShapeError("network expects " + std::to_string(input_size()) + " inputs, got " +
                     std::to_string(batch.cols()));
  }
  if (!train_mode || config_.dropout_rate == 0.0) return predict(batch);
  detail::ForwardTrace trace;
  detail::forward_trace(*this, batch, true, &rng, trace);
  return std::move(trace.outputs.back());
}

RealMatrix Mlp::predict(const RealMatrix& batch) const {
  if (batch.cols() != input_size()) {
    throw ShapeError("network expects " + std::to_string(input_size()) + " inputs, got " +
                     std::to_string(batch.cols()));
  }
  RealMatrix current = batch;
  RealMatrix next;
  for (const auto& layer : layers_) {
    detail::dense_forward(current, layer, next);
    std::swap(current, next);
  }
  return current;
}

RealMatrix Mlp::encode(const RealMatrix& batch) const {
  if (batch.cols() != input_size()) throw ShapeError("encoder input width mismatch");
  RealMatrix current = batch;
  RealMatrix next;
  for (std::size_t l = 0; l < encoder_boundary_; ++l) {
    detail::dense_forward(current, layers_[l], next);
    std::swap(current, next);
  }
  return current;
}

Mlp Mlp::layer_range(std::size_t first, std::size_t last) const {
  if (first >= last || last > layers_.size()) throw ConfigError("invalid layer range");
  MlpConfig config = config_;
  config.layer_sizes.assign(config_.layer_sizes.begin() + static_cast<std::ptrdiff_t>(first),
                            config_.layer_sizes.begin() + static_cast<std::ptrdiff_t>(last + 1));
  config.hidden_activations.clear();
  for (std::size_t l = first; l + 1 < last; ++l) config.hidden_activations.push_back(layers_[l].activation);
  config.encoder_boundary = 0;
  std::vector<DenseLayer> layers(layers_.begin() + static_cast<std::ptrdiff_t>(first),
                                 layers_.begin() + static_cast<std::ptrdiff_t>(last));
  Mlp out(std::move(config), std::move(layers));
  out.trained_ = trained_;
  return out;
}

Mlp Mlp::with_extra_input(std::uint64_t seed) const {
  MlpConfig config = config_;
  config.layer_sizes[0] += 1;
  std::vector<DenseLayer> layers = layers_;
  auto& first = layers.front();
  const double limit = glorot_limit(first.inputs, first.outputs);
  Rng rng(derive_seed(seed, {kInitStream, 1}));
  // Rows are inputs, so the new input's weights form one extra trailing row.
  for (std::size_t j = 0; j < first.outputs; ++j) first.weights.push_back(rng.uniform(-limit, limit));
  first.inputs += 1;
  Mlp out(std::move(config), std::move(layers));
  out.trained_ = trained_;
  return out;
}

}  // namespace sscp::nn
