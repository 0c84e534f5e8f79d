#pragma once

// Structural mutations over genomes. Every operator returns a valid genome:
// hyperparameters that would break shape inference are re-drawn from the
// subset of values that keeps the network valid, and if no such value exists
// the operator leaves the genome unchanged.

#include <vector>

#include "dndx/genome.hpp"
#include "dndx/rng.hpp"

namespace dndx {

/// Probability that each mutation fires during one mutate() call.
struct MutationRates {
  double inject_convolution = 0.50;
  double inject_pooling = 0.50;
  double add_relu = 0.30;
  double point_mutate = 0.45;
  double inject_segment = 0.15;

  bool operator==(const MutationRates&) const = default;
  void validate() const;
};

/// Value sets new and point-mutated hyperparameters are drawn from.
struct HyperparameterRanges {
  std::vector<int> conv_kernel{1, 3, 5, 7, 11};
  std::vector<int> conv_stride{1, 2, 4};
  std::vector<int> conv_padding{0, 1, 2, 3};
  std::vector<int> conv_filters{16, 32, 64, 128, 256, 512};
  std::vector<int> pool_kernel{2, 3};
  std::vector<int> pool_stride{2, 3};
  std::vector<PoolMode> pool_mode{PoolMode::max, PoolMode::average};
  std::vector<int> fc_units{64, 128, 256, 512, 1024};
  std::vector<InitScheme> init{init::GaussianFanAvg{}, init::UniformFanIn{}, init::Gaussian{0.01}};

  bool operator==(const HyperparameterRanges&) const = default;
  void validate() const;
};

enum class NodeChoice { conv, pool, relu };

/// Applies, in fixed order, inject-convolution, inject-pooling, add-ReLU,
/// point-mutate and inject-segment, each iff a fresh uniform draw is <= its
/// rate. The input is not modified; the result has fitness unset.
Genome mutate(const Genome& g, const MutationRates& rates, const HyperparameterRanges& ranges, Rng& rng);

/// Splits a uniformly chosen eligible connection with one new layer.
Genome inject_node(const Genome& g, NodeChoice choice, const HyperparameterRanges& ranges, Rng& rng);

/// Splits one eligible connection with a Conv -> ReLU -> Pool unit.
Genome inject_segment(const Genome& g, const HyperparameterRanges& ranges, Rng& rng);

/// Re-draws one hyperparameter field of one Conv, Pool or FullyConnected gene.
Genome point_mutate(const Genome& g, const HyperparameterRanges& ranges, Rng& rng);

/// Connections a layer of the given kind may be injected into. Spatial layers
/// (conv/pool) only go before the first fully connected layer; nothing is ever
/// placed between the classifier head and the softmax output.
std::vector<ConnectionGene> eligible_connections(const Genome& g, NodeChoice choice);

/// Inserts `chain` (already drawn) into connection `at` and repairs it:
/// first by re-drawing a single offending field of one inserted gene from its
/// valid subset, then by a uniform draw over all valid settings of the
/// inserted genes. Returns the input unchanged when nothing is valid.
Genome insert_chain(const Genome& g, ConnectionGene at, std::vector<LayerKind> chain,
                    const HyperparameterRanges& ranges, Rng& rng);

}  // namespace dndx
