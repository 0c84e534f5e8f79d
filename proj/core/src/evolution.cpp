#include "dndx/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace dndx {

namespace {

double fitness_or_min(const Genome& g) { return g.fitness.value_or(-std::numeric_limits<double>::infinity()); }

std::vector<int> kind_sequence(const Genome& g) {
  std::vector<int> seq;
  for (GeneId id : topo_order(g)) seq.push_back(static_cast<int>(g.find(id)->kind.index()));
  return seq;
}

std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Index of the species holding the population's fittest member (first wins).
std::optional<std::size_t> protected_species(const Population& p) {
  std::optional<std::size_t> best_species;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < p.species.size(); ++s)
    for (const auto& m : p.species[s].members)
      if (m.fitness && (!best_species || *m.fitness > best)) {
        best = *m.fitness;
        best_species = s;
      }
  return best_species;
}

template <class Pred>
Population drop_species_if(Population p, Pred drop) {
  const auto keep = protected_species(p);
  std::vector<Species> kept;
  for (std::size_t s = 0; s < p.species.size(); ++s)
    if ((keep && *keep == s) || !drop(p.species[s])) kept.push_back(std::move(p.species[s]));
  p.species = std::move(kept);
  return p;
}

constexpr std::uint64_t kEvaluationStream = 0;
constexpr std::uint64_t kMutationStream = 1;

}  // namespace

std::size_t Population::size() const {
  std::size_t n = 0;
  for (const auto& s : species) n += s.members.size();
  return n;
}

std::vector<Genome> Population::genomes() const {
  std::vector<Genome> all;
  for (const auto& s : species) all.insert(all.end(), s.members.begin(), s.members.end());
  return all;
}

void EvolutionConfig::validate() const {
  if (population_size < 1) throw std::invalid_argument("population_size must be >= 1");
  if (max_generations < 1) throw std::invalid_argument("max_generations must be >= 1");
  if (!(target_fitness >= 0.0 && target_fitness <= 1.0)) throw std::invalid_argument("target_fitness must lie in [0, 1]");
  if (!(cull_fraction > 0.0 && cull_fraction < 1.0)) throw std::invalid_argument("cull_fraction must lie in (0, 1)");
  if (staleness_limit < 1) throw std::invalid_argument("staleness_limit must be >= 1");
  if (!(compatibility_threshold >= 0.0)) throw std::invalid_argument("compatibility_threshold must be >= 0");
  if (!(length_coefficient >= 0.0 && edit_coefficient >= 0.0))
    throw std::invalid_argument("compatibility coefficients must be >= 0");
  if (input.height < 1 || input.width < 1 || input.channels < 1) throw std::invalid_argument("input shape must be positive");
  if (classes < 2) throw std::invalid_argument("classes must be >= 2");
  rates.validate();
  ranges.validate();
}

double compatibility_distance(const Genome& a, const Genome& b, double length_coefficient, double edit_coefficient) {
  const auto sa = kind_sequence(a);
  const auto sb = kind_sequence(b);
  const double length_gap = std::fabs(static_cast<double>(sa.size()) - static_cast<double>(sb.size()));
  return length_coefficient * length_gap + edit_coefficient * static_cast<double>(edit_distance(sa, sb));
}

std::vector<Species> speciate(std::span<const Genome> genomes, double threshold) {
  return respeciate({}, genomes, threshold);
}

std::vector<Species> respeciate(std::vector<Species> prior, std::span<const Genome> genomes, double threshold) {
  for (auto& s : prior) s.members.clear();
  for (const auto& g : genomes) {
    auto home = std::find_if(prior.begin(), prior.end(), [&](const Species& s) {
      return compatibility_distance(s.representative, g) <= threshold;
    });
    if (home != prior.end()) {
      home->members.push_back(g);
    } else {
      Species fresh;
      fresh.representative = g;
      fresh.members.push_back(g);
      prior.push_back(std::move(fresh));
    }
  }
  std::erase_if(prior, [](const Species& s) { return s.members.empty(); });
  for (auto& s : prior) s.representative = s.members.front();
  return prior;
}

bool ranks_before(const Genome& a, const Genome& b) {
  const double fa = fitness_or_min(a);
  const double fb = fitness_or_min(b);
  if (fa != fb) return fa > fb;
  if (a.lineage != b.lineage) return a.lineage < b.lineage;
  const GeneId ia = a.genes.empty() ? 0 : a.genes.front().id;
  const GeneId ib = b.genes.empty() ? 0 : b.genes.front().id;
  return ia < ib;
}

Population cull_species(Population p, double cull_fraction) {
  for (auto& s : p.species) {
    std::stable_sort(s.members.begin(), s.members.end(), ranks_before);
    const auto keep = static_cast<std::size_t>(std::ceil((1.0 - cull_fraction) * static_cast<double>(s.members.size())));
    s.members.resize(std::clamp<std::size_t>(keep, 1, s.members.size()));
  }
  return p;
}

Population remove_stale_species(Population p, int staleness_limit) {
  return drop_species_if(std::move(p), [&](const Species& s) { return s.staleness >= staleness_limit; });
}

Population remove_weak_species(Population p) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& s : p.species)
    for (const auto& m : s.members)
      if (m.fitness) {
        total += *m.fitness;
        ++count;
      }
  if (count == 0) return p;
  const double population_mean = total / static_cast<double>(count);
  return drop_species_if(std::move(p), [&](const Species& s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& m : s.members)
      if (m.fitness) {
        sum += *m.fitness;
        ++n;
      }
    return n > 0 && sum / static_cast<double>(n) < 0.5 * population_mean;
  });
}

void update_species_stats(Population& p) {
  for (auto& s : p.species) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : s.members) best = std::max(best, fitness_or_min(m));
    if (best > s.top_fitness) {
      s.top_fitness = best;
      s.staleness = 0;
    } else {
      ++s.staleness;
    }
  }
}

Population new_generation(const Population& p, const EvolutionConfig& cfg, Rng& rng) {
  Population q = cull_species(p, cfg.cull_fraction);
  q = remove_stale_species(std::move(q), cfg.staleness_limit);
  q = remove_weak_species(std::move(q));

  const std::vector<Genome> survivors = q.genomes();
  if (survivors.empty()) throw ExtinctionError("no genomes survived the removal passes");

  std::vector<Genome> offspring;
  offspring.reserve(p.size_target);
  while (offspring.size() < p.size_target) {
    const Genome& parent = survivors[rng.uniform_index(survivors.size())];
    Genome child = mutate(parent, cfg.rates, cfg.ranges, rng);
    child.lineage = p.generation + 1;
    offspring.push_back(std::move(child));
  }

  Population next;
  next.species = respeciate(std::move(q.species), offspring, cfg.compatibility_threshold);
  next.generation = p.generation + 1;
  next.best_genome = p.best_genome;
  next.size_target = p.size_target;
  return next;
}

std::uint64_t evaluation_seed(std::uint64_t master, int generation, std::size_t index) {
  return derive_seed(master, 2 * static_cast<std::uint64_t>(generation) + kEvaluationStream, index);
}

EvolutionResult run_neat(const EvolutionConfig& cfg, const FitnessEvaluator& evaluate, const RunOptions& options) {
  cfg.validate();

  Population p;
  p.size_target = cfg.population_size;
  const std::vector<Genome> initial(cfg.population_size, minimal_genome(cfg.input, cfg.classes));
  p.species = speciate(initial, cfg.compatibility_threshold);

  EvolutionResult result;
  while (true) {
    // Flatten, evaluate everything without a fitness, write results back.
    std::vector<Genome*> slots;
    for (auto& s : p.species)
      for (auto& m : s.members) slots.push_back(&m);

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < slots.size(); ++i)
      if (!slots[i]->fitness) pending.push_back(i);

    std::vector<double> scores(slots.size(), 0.0);
    std::vector<std::exception_ptr> errors(slots.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k = next++; k < pending.size(); k = next++) {
        const std::size_t i = pending[k];
        try {
          scores[i] = evaluate(*slots[i], evaluation_seed(cfg.seed, p.generation, i));
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(pending.size())));
    if (jobs <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i : pending) {
      std::string reason;
      if (errors[i]) {
        try {
          std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
          reason = e.what();
        } catch (...) {
          reason = "unknown exception";
        }
      } else if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
        reason = "fitness " + std::to_string(scores[i]) + " outside [0, 1]";
      }
      if (!reason.empty()) {
        Genome failed = *slots[i];
        failed.fitness.reset();
        throw EvaluationError("evaluation failed in generation " + std::to_string(p.generation) + ": " + reason,
                              serialize(failed));
      }
      slots[i]->fitness = scores[i];
    }

    update_species_stats(p);

    double sum = 0.0;
    const Genome* gen_best = nullptr;
    std::size_t gen_best_index = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      sum += *slots[i]->fitness;
      if (!gen_best || *slots[i]->fitness > *gen_best->fitness) {
        gen_best = slots[i];
        gen_best_index = i;
      }
    }
    if (!p.best_genome || *gen_best->fitness > *p.best_genome->fitness) {
      p.best_genome = *gen_best;
      result.best_seed = evaluation_seed(cfg.seed, p.generation, gen_best_index);
    }

    const GenerationRecord record{p.generation, *p.best_genome->fitness, sum / static_cast<double>(slots.size())};
    result.history.push_back(record);
    if (options.on_generation) options.on_generation(p, record);

    if (*p.best_genome->fitness >= cfg.target_fitness ||
        static_cast<int>(result.history.size()) >= cfg.max_generations)
      break;

    Rng rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(p.generation) + kMutationStream, 0));
    p = new_generation(p, cfg, rng);
  }

  result.best = *p.best_genome;
  return result;
}

}  // namespace dndx
