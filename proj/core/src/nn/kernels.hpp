#pragma once

// Dense-layer kernels shared by inference and training.

#include <cstddef>
#include <vector>

#include "sscp/matrix.hpp"
#include "sscp/nn/mlp.hpp"
#include "sscp/random.hpp"

namespace sscp::nn::detail {

/// out = act(in * W + b). `out` is resized.
void dense_forward(const RealMatrix& in, const DenseLayer& layer, RealMatrix& out);

/// Accumulates dW += in^T * dz and db += colsum(dz).
void dense_param_grad(const RealMatrix& in, const RealMatrix& dz, std::size_t outputs,
                      std::vector<double>& dw, std::vector<double>& db);

/// d_in = dz * W^T. `d_in` is resized.
void dense_input_grad(const RealMatrix& dz, const DenseLayer& layer, RealMatrix& d_in);

/// Activations recorded during a forward pass.
struct ForwardTrace {
  /// outputs[0] is the input batch; outputs[l + 1] is the (dropped-out)
  /// output of layer l.
  std::vector<RealMatrix> outputs;
  /// Per hidden layer: 0 or 1/(1-p) per unit; empty when dropout is off.
  std::vector<RealMatrix> dropout_scale;
};

void forward_trace(const Mlp& model, const RealMatrix& batch, bool train_mode, Rng* rng,
                   ForwardTrace& trace);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
};

/// Backpropagates `d_output` (gradient of the loss w.r.t. the network
/// output) through layers [first_trainable, n_layers). Gradients of frozen
/// layers are left empty.
void backward(const Mlp& model, const ForwardTrace& trace, const RealMatrix& d_output,
              std::size_t first_trainable, Gradients& grads);

}  // namespace sscp::nn::detail
