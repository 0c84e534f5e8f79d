#pragma once

// Population loop: speciation, culling, removal of stale and weak species,
// and generation turnover by mutation of uniformly chosen survivors.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dndx/genome.hpp"
#include "dndx/mutation.hpp"
#include "dndx/rng.hpp"

namespace dndx {

struct Species {
  std::vector<Genome> members;
  double top_fitness = -std::numeric_limits<double>::infinity();
  int staleness = 0;
  Genome representative;
};

struct Population {
  std::vector<Species> species;
  int generation = 0;
  std::optional<Genome> best_genome;
  std::size_t size_target = 50;

  std::size_t size() const;
  /// Members in species order.
  std::vector<Genome> genomes() const;
};

struct EvolutionConfig {
  std::size_t population_size = 50;
  int max_generations = 10;
  double target_fitness = 1.0;
  double cull_fraction = 0.5;
  int staleness_limit = 3;
  double compatibility_threshold = 3.0;
  double length_coefficient = 1.0;
  double edit_coefficient = 1.0;
  MutationRates rates;
  HyperparameterRanges ranges;
  std::uint64_t seed = 1;
  Shape input{256, 256, 1};
  int classes = 2;

  void validate() const;
};

/// Fitness in [0, 1] for a genome, deterministic given (genome, seed).
using FitnessEvaluator = std::function<double(const Genome&, std::uint64_t seed)>;

class ExtinctionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the evaluator throws; carries the offending genome's descriptor.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::string genome_descriptor)
      : std::runtime_error(what), descriptor_(std::move(genome_descriptor)) {}
  const std::string& genome_descriptor() const { return descriptor_; }

 private:
  std::string descriptor_;
};

/// c1 * |len(a) - len(b)| + c2 * edit distance between the layer-kind
/// sequences along topological order.
double compatibility_distance(const Genome& a, const Genome& b, double length_coefficient = 1.0,
                              double edit_coefficient = 1.0);

/// Greedy assignment in input order: each genome joins the first species whose
/// representative lies within `threshold`, else founds a new one.
std::vector<Species> speciate(std::span<const Genome> genomes, double threshold);

/// As speciate, but existing species (members cleared, statistics kept) are
/// offered first so species identity and staleness carry across generations.
/// Species that receive no members are dropped.
std::vector<Species> respeciate(std::vector<Species> prior, std::span<const Genome> genomes, double threshold);

/// Ordering used for culling: fitness descending, then lower lineage, then
/// lower first gene id.
bool ranks_before(const Genome& a, const Genome& b);

Population cull_species(Population p, double cull_fraction);
Population remove_stale_species(Population p, int staleness_limit);
Population remove_weak_species(Population p);

/// Refreshes top_fitness / staleness of every species from its (evaluated)
/// members.
void update_species_stats(Population& p);

/// Cull, remove stale and weak species, then fill the next population with
/// mutated copies of uniformly drawn survivors and re-speciate.
Population new_generation(const Population& p, const EvolutionConfig& cfg, Rng& rng);

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;  ///< best ever evaluated
  double mean_fitness = 0.0;  ///< mean over this generation's population
};

struct EvolutionResult {
  Genome best;
  std::uint64_t best_seed = 0;  ///< evaluation seed that produced best.fitness
  std::vector<GenerationRecord> history;
};

struct RunOptions {
  unsigned jobs = 1;
  /// Called after each generation is evaluated.
  std::function<void(const Population&, const GenerationRecord&)> on_generation;
};

/// Seed for evaluating the genome at `index` of generation `generation`.
std::uint64_t evaluation_seed(std::uint64_t master, int generation, std::size_t index);

EvolutionResult run_neat(const EvolutionConfig& cfg, const FitnessEvaluator& evaluate, const RunOptions& options = {});

}  // namespace dndx
