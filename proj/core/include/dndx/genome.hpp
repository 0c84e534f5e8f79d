#pragma once

// Direct graph encoding of a convolutional network: a list of layer genes
// plus the connections between them. Genomes are plain values; every
// operation here is a pure function of its arguments.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dndx {

using GeneId = std::uint32_t;

namespace init {
struct Gaussian {
  double stddev = 0.01;
  bool operator==(const Gaussian&) const = default;
};
/// Uniform in +-sqrt(3 / fan_in).
struct UniformFanIn {
  bool operator==(const UniformFanIn&) const = default;
};
/// Normal with stddev sqrt(2 / (fan_in + fan_out)).
struct GaussianFanAvg {
  bool operator==(const GaussianFanAvg&) const = default;
};
}  // namespace init

using InitScheme = std::variant<init::Gaussian, init::UniformFanIn, init::GaussianFanAvg>;

enum class PoolMode { max, average };

namespace layer {
struct Input {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool operator==(const Input&) const = default;
};
struct Conv {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  InitScheme init = init::GaussianFanAvg{};
  bool operator==(const Conv&) const = default;
};
struct Pool {
  int kernel = 0;
  int stride = 1;
  PoolMode mode = PoolMode::max;
  bool operator==(const Pool&) const = default;
};
struct Relu {
  bool operator==(const Relu&) const = default;
};
struct FullyConnected {
  int units = 0;
  InitScheme init = init::GaussianFanAvg{};
  bool operator==(const FullyConnected&) const = default;
};
struct SoftmaxOutput {
  int classes = 0;
  bool operator==(const SoftmaxOutput&) const = default;
};
}  // namespace layer

using LayerKind = std::variant<layer::Input, layer::Conv, layer::Pool, layer::Relu,
                               layer::FullyConnected, layer::SoftmaxOutput>;

/// Stable lowercase tag for a layer kind ("input", "conv", ...).
std::string_view kind_name(const LayerKind& kind);

struct LayerGene {
  GeneId id = 0;
  LayerKind kind;
  bool operator==(const LayerGene&) const = default;
};

struct ConnectionGene {
  GeneId from = 0;
  GeneId to = 0;
  bool operator==(const ConnectionGene&) const = default;
};

struct Genome {
  std::vector<LayerGene> genes;
  std::vector<ConnectionGene> connections;
  std::optional<double> fitness;
  int lineage = 0;

  bool operator==(const Genome&) const = default;

  const LayerGene* find(GeneId id) const;
  /// One past the largest id in use. Fresh genes take ids from here, so ids
  /// are never reused as long as genes are only ever added.
  GeneId next_id() const;
};

/// Spatial extent and depth of one layer's output. FullyConnected and
/// SoftmaxOutput layers are recorded as (1, 1, units).
struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;
  bool operator==(const Shape&) const = default;
  long long size() const { return 1LL * height * width * channels; }
};

using ShapeMap = std::map<GeneId, Shape>;

enum class GenomeErrc {
  non_positive_dimension,
  disconnected_gene,
  cycle_detected,
  missing_input,
  missing_output,
  multiple_inputs,
  multiple_outputs,
  bad_degree,
  invalid_fitness,
  duplicate_id,
  duplicate_connection,
  missing_endpoint,
  self_loop,
  invalid_hyperparameter,
  head_mismatch,
  spatial_after_dense,
  incompatible_merge,
};

std::string_view to_string(GenomeErrc code);

class GenomeError : public std::runtime_error {
 public:
  GenomeError(GenomeErrc code, std::optional<GeneId> gene, const std::string& detail);

  GenomeErrc code() const { return code_; }
  std::optional<GeneId> gene() const { return gene_; }

 private:
  GenomeErrc code_;
  std::optional<GeneId> gene_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& reason);
  /// 1-based line of the offending text; 0 when the problem is structural
  /// rather than tied to a position.
  int line() const { return line_; }

 private:
  int line_;
};

/// Input -> FullyConnected(classes) -> SoftmaxOutput(classes), fitness unset.
Genome minimal_genome(Shape input, int classes);

/// Output shape of every gene. Conv/Pool use floor((in + 2p - k) / s) + 1.
/// Throws GenomeError (non_positive_dimension, disconnected_gene,
/// cycle_detected, incompatible_merge, ...).
ShapeMap infer_shapes(const Genome& g);

/// Output shape of one layer fed with `in`; nullopt when its hyperparameters
/// are invalid or the output would have a non-positive dimension.
std::optional<Shape> layer_output(const LayerKind& kind, Shape in);

/// Decides whether a valid genome stays valid when a linear chain of new
/// genes is spliced into one of its connections. The graph is analysed once;
/// each query re-runs shape inference only. `g` must outlive the probe.
class SpliceProbe {
 public:
  /// Throws GenomeError if `g` is invalid or `at` is not one of its connections.
  SpliceProbe(const Genome& g, ConnectionGene at);
  ~SpliceProbe();
  SpliceProbe(SpliceProbe&&) noexcept;
  SpliceProbe& operator=(SpliceProbe&&) noexcept;

  /// Output shape of `at.from`.
  Shape input() const;
  bool accepts(std::span<const LayerKind> chain);

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Deterministic topological order, ties broken by ascending gene id.
std::vector<GeneId> topo_order(const Genome& g);

/// Checks every structural and shape invariant; throws the first violation.
void validate(const Genome& g);

/// Non-throwing form of validate.
std::optional<GenomeError> check(const Genome& g);

inline bool is_valid(const Genome& g) { return !check(g).has_value(); }

/// Genome descriptor document (JSON). serialize requires a valid genome;
/// deserialize re-validates and throws ParseError or GenomeError.
std::string serialize(const Genome& g);
Genome deserialize(std::string_view text);

Genome load_genome(const std::string& path);
void save_genome(const Genome& g, const std::string& path);

}  // namespace dndx
