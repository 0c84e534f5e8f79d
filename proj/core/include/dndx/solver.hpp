#pragma once

#include <cstdint>

#include "dndx/genome.hpp"
#include "dndx/rng.hpp"
#include "dndx/tensor.hpp"

namespace dndx {

enum class LrPolicy { inv };

/// Training hyperparameters shared by every candidate network.
struct SolverConfig {
  double base_lr = 0.01;
  LrPolicy lr_policy = LrPolicy::inv;
  double gamma = 1e-4;
  double power = 0.75;
  double momentum = 0.90;
  double weight_decay = 0.0005;
  int epochs = 5;
  int batch_size = 32;

  bool operator==(const SolverConfig&) const = default;
  void validate() const;
};

/// Parameters of one layer plus their momentum buffers.
struct LayerState {
  Tensor weights;
  Tensor bias;
  Tensor weight_velocity;
  Tensor bias_velocity;

  LayerState() = default;
  LayerState(Tensor w, Tensor b);
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

/// base_lr * (1 + gamma * iter)^(-power)
double inv_lr(std::uint64_t iter, const SolverConfig& cfg);

/// v <- momentum * v - lr * (g + weight_decay * w);  w <- w + v
/// Applied identically to weights and biases.
void sgd_step(LayerState& state, const Tensor& dweights, const Tensor& dbias, double lr,
              const SolverConfig& cfg);

/// Draws a weight tensor for the given scheme; fan_in / fan_out follow the
/// usual convolution convention (in_channels * k * k, filters * k * k).
Tensor init_weights(const InitScheme& scheme, Dims dims, int fan_in, int fan_out, Rng& rng);

}  // namespace dndx
