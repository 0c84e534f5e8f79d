#pragma once

// Run configuration documents. Every field is optional and defaults to the
// shipped value; unknown fields are rejected.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dndx/evolution.hpp"
#include "dndx/imgpipe.hpp"
#include "dndx/solver.hpp"

namespace dndx {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 1;
  EvolutionConfig evolution;  ///< rates and ranges live here; input/classes come from the data
  SolverConfig solver;
  PipelineConfig pipeline;

  void validate() const;
};

/// {"seed", "evolution", "solver", "mutation_rates", "ranges", "pipeline"}
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
/// Canonical document with every field present.
std::string dump_config(const RunConfig& cfg);

/// Replaces cfg.seed with $DNDX_SEED when set. Throws ConfigError on a
/// malformed value.
void apply_seed_override(RunConfig& cfg);

}  // namespace dndx
