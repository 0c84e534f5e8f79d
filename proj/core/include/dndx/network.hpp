#pragma once

// Executable networks compiled from genomes, plus the training and fitness
// procedures the search uses.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dndx/dataset.hpp"
#include "dndx/genome.hpp"
#include "dndx/rng.hpp"
#include "dndx/solver.hpp"
#include "dndx/tensor.hpp"

namespace dndx {

struct NetworkLayer {
  GeneId id = 0;
  LayerKind kind;
  /// Indices (into Network::layers()) of the layers feeding this one; several
  /// inputs are summed elementwise.
  std::vector<std::size_t> inputs;
  Shape shape;
  std::optional<LayerState> state;
};

/// Activations recorded by a forward pass, indexed like Network::layers().
struct ForwardTrace {
  std::vector<Tensor> outputs;
  /// Summed input for layers with more than one predecessor (empty otherwise).
  std::vector<Tensor> merged_inputs;
  std::vector<std::vector<std::uint32_t>> argmax;
};

struct ParamGrad {
  Tensor dweights;
  Tensor dbias;
};

struct BackwardResult {
  std::vector<std::optional<ParamGrad>> params;
  /// Gradient of the objective with respect to each layer's output.
  std::vector<Tensor> output_grads;
};

class Network {
 public:
  const Genome& genome() const { return genome_; }
  const std::vector<NetworkLayer>& layers() const { return layers_; }
  std::vector<NetworkLayer>& layers() { return layers_; }

  Shape input_shape() const { return input_shape_; }
  int classes() const { return classes_; }
  /// Index of the fully connected layer producing the logits.
  std::size_t head_index() const { return head_; }
  std::size_t index_of(GeneId id) const;

  /// Total weights plus biases.
  std::size_t param_count() const;

  ForwardTrace forward(const Tensor& x) const;
  const Tensor& logits(const ForwardTrace& trace) const { return trace.outputs[head_]; }

  /// Back-propagates `dlogits` from the head to every layer.
  BackwardResult backward(const ForwardTrace& trace, const Tensor& dlogits) const;

  /// Argmax class per batch item (lowest index wins ties).
  std::vector<int> predict(const Tensor& x) const;

 private:
  friend Network compile(const Genome& g, Rng& rng);

  Genome genome_;
  std::vector<NetworkLayer> layers_;
  Shape input_shape_;
  int classes_ = 0;
  std::size_t head_ = 0;
};

/// Allocates and initializes parameters per each gene's init scheme.
/// Throws GenomeError for invalid genomes.
Network compile(const Genome& g, Rng& rng);

class NumericalDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  double final_loss = 0.0;  ///< mean batch loss over the last epoch
  std::uint64_t iterations = 0;
};

/// Mini-batch SGD for cfg.epochs epochs, reshuffling every epoch with `rng`.
/// The learning-rate iteration counter runs across epochs.
TrainResult train(Network& net, const Dataset& data, const SolverConfig& cfg, Rng& rng);

/// Stacks dataset items [begin, end) into an (n, 1, h, w) tensor.
Tensor batch_of(const Dataset& data, std::span<const std::size_t> indices);

std::vector<int> predict(const Network& net, const Dataset& data);
double accuracy(const Network& net, const Dataset& data);

/// compile -> train on data.train -> accuracy on data.dev. A network whose
/// loss goes non-finite scores 0.
double evaluate_fitness(const Genome& g, const DatasetSplit& data, const SolverConfig& cfg, std::uint64_t seed);

/// The trained network evaluate_fitness would score, for export.
Network train_genome(const Genome& g, const Dataset& train_set, const SolverConfig& cfg, std::uint64_t seed);

}  // namespace dndx
