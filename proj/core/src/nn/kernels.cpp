#include "kernels.hpp"

#include <algorithm>

namespace sscp::nn::detail {

void dense_forward(const RealMatrix& in, const DenseLayer& layer, RealMatrix& out) {
  const std::size_t n = in.rows();
  const std::size_t n_in = layer.inputs;
  const std::size_t n_out = layer.outputs;
  if (out.rows() != n || out.cols() != n_out) out = RealMatrix(n, n_out);
  const double* w = layer.weights.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = in.data() + i * n_in;
    double* z = out.data() + i * n_out;
    std::copy(layer.bias.begin(), layer.bias.end(), z);
    for (std::size_t k = 0; k < n_in; ++k) {
      const double ak = a[k];
      if (ak == 0.0) continue;
      const double* wk = w + k * n_out;
      for (std::size_t j = 0; j < n_out; ++j) z[j] += ak * wk[j];
    }
    if (layer.activation == Activation::kRelu) {
      for (std::size_t j = 0; j < n_out; ++j) z[j] = z[j] > 0.0 ? z[j] : 0.0;
    }
  }
}

void dense_param_grad(const RealMatrix& in, const RealMatrix& dz, std::size_t outputs,
                      std::vector<double>& dw, std::vector<double>& db) {
  const std::size_t n_in = in.cols();
  for (std::size_t i = 0; i < in.rows(); ++i) {
    const double* a = in.data() + i * n_in;
    const double* g = dz.data() + i * outputs;
    for (std::size_t j = 0; j < outputs; ++j) db[j] += g[j];
    for (std::size_t k = 0; k < n_in; ++k) {
      const double ak = a[k];
      if (ak == 0.0) continue;
      double* row = dw.data() + k * outputs;
      for (std::size_t j = 0; j < outputs; ++j) row[j] += ak * g[j];
    }
  }
}

void dense_input_grad(const RealMatrix& dz, const DenseLayer& layer, RealMatrix& d_in) {
  const std::size_t n = dz.rows();
  if (d_in.rows() != n || d_in.cols() != layer.inputs) d_in = RealMatrix(n, layer.inputs);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = dz.data() + i * layer.outputs;
    double* d = d_in.data() + i * layer.inputs;
    for (std::size_t k = 0; k < layer.inputs; ++k) {
      const double* wk = layer.weights.data() + k * layer.outputs;
      double sum = 0.0;
      for (std::size_t j = 0; j < layer.outputs; ++j) sum += g[j] * wk[j];
      d[k] = sum;
    }
  }
}

void forward_trace(const Mlp& model, const RealMatrix& batch, bool train_mode, Rng* rng,
                   ForwardTrace& trace) {
  const auto& layers = model.layers();
  const double p = model.config().dropout_rate;
  const bool dropout = train_mode && p > 0.0;
  trace.outputs.resize(layers.size() + 1);
  trace.dropout_scale.resize(dropout ? layers.size() - 1 : 0);
  trace.outputs[0] = batch;
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    dense_forward(trace.outputs[l], layers[l], trace.outputs[l + 1]);
    if (dropout && l + 1 < layers.size()) {
      auto& out = trace.outputs[l + 1];
      auto& scale = trace.dropout_scale[l];
      if (scale.rows() != out.rows() || scale.cols() != out.cols()) scale = RealMatrix(out.rows(), out.cols());
      auto sv = scale.values();
      auto ov = out.values();
      for (std::size_t i = 0; i < ov.size(); ++i) {
        sv[i] = rng->uniform() < p ? 0.0 : keep_scale;
        ov[i] *= sv[i];
      }
    }
  }
}

void backward(const Mlp& model, const ForwardTrace& trace, const RealMatrix& d_output,
              std::size_t first_trainable, Gradients& grads) {
  const auto& layers = model.layers();
  const std::size_t n_layers = layers.size();
  grads.weights.resize(n_layers);
  grads.bias.resize(n_layers);
  RealMatrix dz = d_output;
  RealMatrix d_in;
  for (std::size_t l = n_layers; l-- > first_trainable;) {
    const auto& layer = layers[l];
    const bool is_hidden = l + 1 < n_layers;
    if (is_hidden) {
      // dz currently holds d(loss)/d(layer output after dropout).
      auto g = dz.values();
      const auto out = trace.outputs[l + 1].values();
      const bool has_dropout = !trace.dropout_scale.empty();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double v = g[i];
        if (has_dropout) v *= trace.dropout_scale[l].values()[i];
        if (layer.activation == Activation::kRelu && !(out[i] > 0.0)) v = 0.0;
        g[i] = v;
      }
    }
    grads.weights[l].assign(layer.weights.size(), 0.0);
    grads.bias[l].assign(layer.bias.size(), 0.0);
    dense_param_grad(trace.outputs[l], dz, layer.outputs, grads.weights[l], grads.bias[l]);
    if (l > first_trainable) {
      dense_input_grad(dz, layer, d_in);
      std::swap(dz, d_in);
    }
  }
  for (std::size_t l = 0; l < first_trainable && l < n_layers; ++l) {
    grads.weights[l].clear();
    grads.bias[l].clear();
  }
}

}  // namespace sscp::nn::detail
