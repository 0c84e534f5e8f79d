#pragma once

// Forward and backward kernels for the layer vocabulary. Convolution is
// cross-correlation (no kernel flip). Conv weights are laid out
// (filters, in_channels, kernel, kernel); fully connected weights are
// (units, inputs, 1, 1); biases are (units, 1, 1, 1).

#include <cstdint>
#include <span>
#include <vector>

#include "dndx/tensor.hpp"

namespace dndx::nn {

struct ConvGeometry {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
};

struct PoolGeometry {
  int kernel = 2;
  int stride = 2;
};

/// floor((in + 2 * padding - kernel) / stride) + 1
int window_output(int in, int kernel, int stride, int padding);

Tensor conv2d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias, ConvGeometry g);

struct ConvGrads {
  Tensor dx;
  Tensor dweights;
  Tensor dbias;
};
ConvGrads conv2d_backward(const Tensor& x, const Tensor& weights, const Tensor& dy, ConvGeometry g);

struct MaxPoolOutput {
  Tensor y;
  /// Flat index into x of the element each output was taken from.
  std::vector<std::uint32_t> argmax;
};
/// Ties resolve to the first position in row-major window order.
MaxPoolOutput maxpool_forward(const Tensor& x, PoolGeometry g);
Tensor maxpool_backward(const Tensor& dy, std::span<const std::uint32_t> argmax, Dims x_dims);

Tensor avgpool_forward(const Tensor& x, PoolGeometry g);
Tensor avgpool_backward(const Tensor& dy, Dims x_dims, PoolGeometry g);

Tensor relu_forward(const Tensor& x);
/// Passes dy where x > 0, zero elsewhere.
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// x is flattened per batch item; y has dims (n, units, 1, 1).
Tensor fc_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct FcGrads {
  Tensor dx;
  Tensor dweights;
  Tensor dbias;
};
FcGrads fc_backward(const Tensor& x, const Tensor& weights, const Tensor& dy);

struct LossOutput {
  double loss = 0.0;  ///< mean over the batch
  Tensor dlogits;
};
/// Softmax with max-subtraction followed by cross-entropy against integer labels.
LossOutput softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Row-wise softmax probabilities.
Tensor softmax(const Tensor& logits);

}  // namespace dndx::nn
