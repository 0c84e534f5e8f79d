#include "dndx/mutation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace dndx {

namespace {

enum class Field { filters, kernel, stride, padding, init, mode, units };

using FieldValue = std::variant<int, InitScheme, PoolMode>;

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string("mutation rate ") + name + " must lie in [0, 1]");
}

template <class T>
void require_non_empty(const std::vector<T>& v, const char* name) {
  if (v.empty()) throw std::invalid_argument(std::string("hyperparameter range ") + name + " is empty");
}

template <class T>
std::vector<FieldValue> as_values(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

std::vector<FieldValue> range_of(Field f, const LayerKind& kind, const HyperparameterRanges& r) {
  const bool conv = std::holds_alternative<layer::Conv>(kind);
  switch (f) {
    case Field::filters: return as_values(r.conv_filters);
    case Field::kernel: return as_values(conv ? r.conv_kernel : r.pool_kernel);
    case Field::stride: return as_values(conv ? r.conv_stride : r.pool_stride);
    case Field::padding: return as_values(r.conv_padding);
    case Field::init: return as_values(r.init);
    case Field::mode: return as_values(r.pool_mode);
    case Field::units: return as_values(r.fc_units);
  }
  return {};
}

FieldValue get_field(const LayerKind& kind, Field f) {
  if (const auto* c = std::get_if<layer::Conv>(&kind)) {
    switch (f) {
      case Field::filters: return c->filters;
      case Field::kernel: return c->kernel;
      case Field::stride: return c->stride;
      case Field::padding: return c->padding;
      case Field::init: return c->init;
      default: break;
    }
  } else if (const auto* p = std::get_if<layer::Pool>(&kind)) {
    switch (f) {
      case Field::kernel: return p->kernel;
      case Field::stride: return p->stride;
      case Field::mode: return p->mode;
      default: break;
    }
  } else if (const auto* fc = std::get_if<layer::FullyConnected>(&kind)) {
    switch (f) {
      case Field::units: return fc->units;
      case Field::init: return fc->init;
      default: break;
    }
  }
  throw std::logic_error("field not present on layer kind");
}

void set_field(LayerKind& kind, Field f, const FieldValue& v) {
  if (auto* c = std::get_if<layer::Conv>(&kind)) {
    switch (f) {
      case Field::filters: c->filters = std::get<int>(v); return;
      case Field::kernel: c->kernel = std::get<int>(v); return;
      case Field::stride: c->stride = std::get<int>(v); return;
      case Field::padding: c->padding = std::get<int>(v); return;
      case Field::init: c->init = std::get<InitScheme>(v); return;
      default: break;
    }
  } else if (auto* p = std::get_if<layer::Pool>(&kind)) {
    switch (f) {
      case Field::kernel: p->kernel = std::get<int>(v); return;
      case Field::stride: p->stride = std::get<int>(v); return;
      case Field::mode: p->mode = std::get<PoolMode>(v); return;
      default: break;
    }
  } else if (auto* fc = std::get_if<layer::FullyConnected>(&kind)) {
    switch (f) {
      case Field::units: fc->units = std::get<int>(v); return;
      case Field::init: fc->init = std::get<InitScheme>(v); return;
      default: break;
    }
  }
  throw std::logic_error("field not present on layer kind");
}

/// Fields whose value can make shape inference fail.
std::vector<Field> spatial_fields(const LayerKind& kind) {
  if (std::holds_alternative<layer::Conv>(kind)) return {Field::kernel, Field::stride, Field::padding};
  if (std::holds_alternative<layer::Pool>(kind)) return {Field::kernel, Field::stride};
  return {};
}

LayerKind draw_conv(const HyperparameterRanges& r, Rng& rng) {
  layer::Conv c;
  c.filters = rng.pick(std::span<const int>(r.conv_filters));
  c.kernel = rng.pick(std::span<const int>(r.conv_kernel));
  c.stride = rng.pick(std::span<const int>(r.conv_stride));
  std::vector<int> pads;
  for (int p : r.conv_padding)
    if (p <= (c.kernel - 1) / 2) pads.push_back(p);
  c.padding = pads.empty() ? rng.pick(std::span<const int>(r.conv_padding))
                           : rng.pick(std::span<const int>(pads));
  c.init = rng.pick(std::span<const InitScheme>(r.init));
  return c;
}

LayerKind draw_pool(const HyperparameterRanges& r, Rng& rng) {
  layer::Pool p;
  p.kernel = rng.pick(std::span<const int>(r.pool_kernel));
  p.stride = rng.pick(std::span<const int>(r.pool_stride));
  p.mode = rng.pick(std::span<const PoolMode>(r.pool_mode));
  return p;
}

std::size_t gene_index(const Genome& g, GeneId id) {
  for (std::size_t i = 0; i < g.genes.size(); ++i)
    if (g.genes[i].id == id) return i;
  throw std::logic_error("gene not found");
}

Genome spliced(const Genome& g, ConnectionGene at, const std::vector<LayerKind>& chain) {
  Genome out = g;
  auto it = std::find(out.connections.begin(), out.connections.end(), at);
  if (it == out.connections.end()) throw std::invalid_argument("insertion point is not a connection");
  out.connections.erase(it);
  GeneId prev = at.from;
  GeneId next_id = g.next_id();
  for (const auto& kind : chain) {
    out.genes.push_back(LayerGene{next_id, kind});
    out.connections.push_back(ConnectionGene{prev, next_id});
    prev = next_id++;
  }
  out.connections.push_back(ConnectionGene{prev, at.to});
  return out;
}

// Sorted ids of genes whose output is flattened (a fully connected layer at
// or upstream).
std::vector<GeneId> dense_genes(const Genome& g) {
  std::vector<std::pair<GeneId, GeneId>> preds;  // (to, from)
  preds.reserve(g.connections.size());
  for (const auto& c : g.connections) preds.emplace_back(c.to, c.from);
  std::sort(preds.begin(), preds.end());
  std::vector<GeneId> dense;
  for (GeneId id : topo_order(g)) {
    const LayerGene* gene = g.find(id);
    bool d = std::holds_alternative<layer::FullyConnected>(gene->kind) ||
             std::holds_alternative<layer::SoftmaxOutput>(gene->kind);
    auto it = std::lower_bound(preds.begin(), preds.end(), std::pair{id, GeneId{0}});
    for (; !d && it != preds.end() && it->first == id; ++it) d = std::binary_search(dense.begin(), dense.end(), it->second);
    if (d) dense.insert(std::lower_bound(dense.begin(), dense.end(), id), id);
  }
  return dense;
}

}  // namespace

void MutationRates::validate() const {
  require_probability(inject_convolution, "inject_convolution");
  require_probability(inject_pooling, "inject_pooling");
  require_probability(add_relu, "add_relu");
  require_probability(point_mutate, "point_mutate");
  require_probability(inject_segment, "inject_segment");
}

void HyperparameterRanges::validate() const {
  require_non_empty(conv_kernel, "conv_kernel");
  require_non_empty(conv_stride, "conv_stride");
  require_non_empty(conv_padding, "conv_padding");
  require_non_empty(conv_filters, "conv_filters");
  require_non_empty(pool_kernel, "pool_kernel");
  require_non_empty(pool_stride, "pool_stride");
  require_non_empty(pool_mode, "pool_mode");
  require_non_empty(fc_units, "fc_units");
  require_non_empty(init, "init");
  auto positive = [](const std::vector<int>& v, const char* name, int min) {
    for (int x : v)
      if (x < min)
        throw std::invalid_argument(std::string("hyperparameter range ") + name + " has value " +
                                    std::to_string(x));
  };
  positive(conv_kernel, "conv_kernel", 1);
  positive(conv_stride, "conv_stride", 1);
  positive(conv_padding, "conv_padding", 0);
  positive(conv_filters, "conv_filters", 1);
  positive(pool_kernel, "pool_kernel", 1);
  positive(pool_stride, "pool_stride", 1);
  positive(fc_units, "fc_units", 1);
  for (const auto& s : init)
    if (const auto* gauss = std::get_if<init::Gaussian>(&s); gauss && !(gauss->stddev > 0.0))
      throw std::invalid_argument("gaussian init stddev must be > 0");
}

std::vector<ConnectionGene> eligible_connections(const Genome& g, NodeChoice choice) {
  const auto dense = dense_genes(g);
  std::vector<ConnectionGene> out;
  for (const auto& c : g.connections) {
    const LayerGene* to = g.find(c.to);
    if (std::holds_alternative<layer::SoftmaxOutput>(to->kind)) continue;
    if (choice != NodeChoice::relu && std::binary_search(dense.begin(), dense.end(), c.from)) continue;
    out.push_back(c);
  }
  return out;
}

Genome insert_chain(const Genome& g, ConnectionGene at, std::vector<LayerKind> chain,
                    const HyperparameterRanges& ranges, Rng& rng) {
  SpliceProbe probe(g, at);
  auto valid = [&](const std::vector<LayerKind>& trial) { return probe.accepts(trial); };
  Genome candidate = spliced(g, at, chain);
  if (valid(chain)) return candidate;

  const std::size_t first_new = g.genes.size();

  // Re-draw one offending field from the values that make the network valid.
  for (std::size_t i = 0; i < chain.size(); ++i) {
    for (Field f : spatial_fields(chain[i])) {
      std::vector<FieldValue> options;
      for (const auto& v : range_of(f, chain[i], ranges)) {
        std::vector<LayerKind> trial = chain;
        set_field(trial[i], f, v);
        if (valid(trial)) options.push_back(v);
      }
      if (!options.empty()) {
        set_field(candidate.genes[first_new + i].kind, f, options[rng.uniform_index(options.size())]);
        return candidate;
      }
    }
  }

  // No single field suffices: draw uniformly over every valid joint setting
  // of the inserted genes' spatial fields.
  struct Slot {
    std::size_t gene;
    Field field;
    std::vector<FieldValue> values;
  };
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (Field f : spatial_fields(chain[i])) slots.push_back({i, f, range_of(f, chain[i], ranges)});

  std::vector<std::vector<std::size_t>> valid_settings;
  std::vector<std::size_t> idx(slots.size(), 0);
  while (!slots.empty()) {
    std::vector<LayerKind> trial = chain;
    for (std::size_t s = 0; s < slots.size(); ++s) set_field(trial[slots[s].gene], slots[s].field, slots[s].values[idx[s]]);
    if (valid(trial)) valid_settings.push_back(idx);
    std::size_t s = 0;
    while (s < slots.size() && ++idx[s] == slots[s].values.size()) idx[s++] = 0;
    if (s == slots.size()) break;
  }
  if (valid_settings.empty()) return g;

  const auto& pick = valid_settings[rng.uniform_index(valid_settings.size())];
  for (std::size_t s = 0; s < slots.size(); ++s)
    set_field(candidate.genes[first_new + slots[s].gene].kind, slots[s].field, slots[s].values[pick[s]]);
  return candidate;
}

Genome inject_node(const Genome& g, NodeChoice choice, const HyperparameterRanges& ranges, Rng& rng) {
  const auto eligible = eligible_connections(g, choice);
  if (eligible.empty()) return g;
  const ConnectionGene at = eligible[rng.uniform_index(eligible.size())];
  switch (choice) {
    case NodeChoice::relu: return insert_chain(g, at, {layer::Relu{}}, ranges, rng);
    case NodeChoice::conv: return insert_chain(g, at, {draw_conv(ranges, rng)}, ranges, rng);
    case NodeChoice::pool: return insert_chain(g, at, {draw_pool(ranges, rng)}, ranges, rng);
  }
  return g;
}

Genome inject_segment(const Genome& g, const HyperparameterRanges& ranges, Rng& rng) {
  const auto eligible = eligible_connections(g, NodeChoice::conv);
  if (eligible.empty()) return g;
  const ConnectionGene at = eligible[rng.uniform_index(eligible.size())];
  LayerKind conv = draw_conv(ranges, rng);
  LayerKind pool = draw_pool(ranges, rng);
  return insert_chain(g, at, {std::move(conv), layer::Relu{}, std::move(pool)}, ranges, rng);
}

Genome point_mutate(const Genome& g, const HyperparameterRanges& ranges, Rng& rng) {
  std::unordered_set<GeneId> heads;
  for (const auto& c : g.connections)
    if (std::holds_alternative<layer::SoftmaxOutput>(g.find(c.to)->kind)) heads.insert(c.from);

  std::vector<GeneId> candidates;
  for (const auto& gene : g.genes)
    if (std::holds_alternative<layer::Conv>(gene.kind) || std::holds_alternative<layer::Pool>(gene.kind) ||
        std::holds_alternative<layer::FullyConnected>(gene.kind))
      candidates.push_back(gene.id);
  if (candidates.empty()) return g;

  const GeneId target = candidates[rng.uniform_index(candidates.size())];
  const std::size_t index = gene_index(g, target);
  const LayerKind& kind = g.genes[index].kind;

  std::vector<Field> fields;
  if (std::holds_alternative<layer::Conv>(kind)) {
    fields = {Field::filters, Field::kernel, Field::stride, Field::padding, Field::init};
  } else if (std::holds_alternative<layer::Pool>(kind)) {
    fields = {Field::kernel, Field::stride, Field::mode};
  } else if (heads.contains(target)) {
    // the classifier head's width is pinned to the class count
    fields = {Field::init};
  } else {
    fields = {Field::units, Field::init};
  }
  const Field field = fields[rng.uniform_index(fields.size())];

  const FieldValue current = get_field(kind, field);
  std::vector<FieldValue> values;
  for (const auto& v : range_of(field, kind, ranges))
    if (v != current) values.push_back(v);
  if (values.empty()) return g;

  Genome out = g;
  set_field(out.genes[index].kind, field, values[rng.uniform_index(values.size())]);
  if (is_valid(out)) return out;

  std::vector<FieldValue> valid;
  for (const auto& v : values) {
    Genome trial = g;
    set_field(trial.genes[index].kind, field, v);
    if (is_valid(trial)) valid.push_back(v);
  }
  if (valid.empty()) return g;
  out = g;
  set_field(out.genes[index].kind, field, valid[rng.uniform_index(valid.size())]);
  return out;
}

Genome mutate(const Genome& g, const MutationRates& rates, const HyperparameterRanges& ranges, Rng& rng) {
  Genome out = g;
  if (rng.uniform() <= rates.inject_convolution) out = inject_node(out, NodeChoice::conv, ranges, rng);
  if (rng.uniform() <= rates.inject_pooling) out = inject_node(out, NodeChoice::pool, ranges, rng);
  if (rng.uniform() <= rates.add_relu) out = inject_node(out, NodeChoice::relu, ranges, rng);
  if (rng.uniform() <= rates.point_mutate) out = point_mutate(out, ranges, rng);
  if (rng.uniform() <= rates.inject_segment) out = inject_segment(out, ranges, rng);
  out.fitness.reset();
  return out;
}

}  // namespace dndx
