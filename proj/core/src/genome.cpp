#include "dndx/genome.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace dndx {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

GenomeError fail(GenomeErrc code, std::optional<GeneId> gene, const std::string& detail) {
  return GenomeError(code, gene, detail);
}

std::string gene_label(GeneId id) { return "gene " + std::to_string(id); }

// Genes addressed by position in id order; preds / succs hold positions.
// Compressed adjacency: neighbours of i are data[offset[i] .. offset[i + 1]).
struct Adjacency {
  std::vector<int> offset;
  std::vector<int> data;

  std::span<const int> operator[](std::size_t i) const {
    return std::span<const int>(data).subspan(offset[i], offset[i + 1] - offset[i]);
  }
};

struct Graph {
  std::vector<GeneId> ids;
  std::vector<const LayerGene*> genes;
  Adjacency preds;
  Adjacency succs;

  int index(GeneId id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    return (it == ids.end() || *it != id) ? -1 : static_cast<int>(it - ids.begin());
  }
};

// Gene ids must be unique.
Graph graph(const Genome& g) {
  Graph gr;
  std::vector<const LayerGene*> sorted;
  sorted.reserve(g.genes.size());
  for (const auto& gene : g.genes) sorted.push_back(&gene);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  gr.genes = sorted;
  gr.ids.reserve(sorted.size());
  for (auto* gene : sorted) gr.ids.push_back(gene->id);
  const std::size_t n = sorted.size();
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.connections.size());
  for (const auto& c : g.connections) {
    const int from = gr.index(c.from);
    const int to = gr.index(c.to);
    if (from < 0 || to < 0)
      throw fail(GenomeErrc::missing_endpoint, from < 0 ? c.from : c.to, "connection references an unknown gene");
    edges.emplace_back(from, to);
  }
  auto fill = [&](Adjacency& adj, auto key, auto value) {
    adj.offset.assign(n + 1, 0);
    adj.data.resize(edges.size());
    for (const auto& e : edges) ++adj.offset[key(e) + 1];
    for (std::size_t i = 0; i < n; ++i) adj.offset[i + 1] += adj.offset[i];
    std::vector<int> cursor(adj.offset.begin(), adj.offset.end() - 1);
    for (const auto& e : edges) adj.data[cursor[key(e)]++] = value(e);
    for (std::size_t i = 0; i < n; ++i)
      std::sort(adj.data.begin() + adj.offset[i], adj.data.begin() + adj.offset[i + 1]);
  };
  fill(gr.preds, [](const auto& e) { return e.second; }, [](const auto& e) { return e.first; });
  fill(gr.succs, [](const auto& e) { return e.first; }, [](const auto& e) { return e.second; });
  return gr;
}

// Kahn's algorithm with a min-heap so the order is a function of the graph
// alone, not of gene or connection insertion order.
std::optional<std::vector<int>> kahn(const Graph& gr) {
  const std::size_t n = gr.ids.size();
  std::vector<std::size_t> indegree(n);
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = gr.preds[i].size();
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int i = ready.top();
    ready.pop();
    order.push_back(i);
    for (int next : gr.succs[i])
      if (--indegree[next] == 0) ready.push(next);
  }
  if (order.size() != n) return std::nullopt;
  return order;
}

bool valid_init(const InitScheme& s) {
  if (const auto* gauss = std::get_if<init::Gaussian>(&s))
    return std::isfinite(gauss->stddev) && gauss->stddev > 0.0;
  return true;
}

std::optional<std::string> hyperparameter_problem(const LayerKind& kind) {
  return std::visit(
      overloaded{
          [](const layer::Input& l) -> std::optional<std::string> {
            if (l.height < 1 || l.width < 1 || l.channels < 1) return "input dimensions must be >= 1";
            return std::nullopt;
          },
          [](const layer::Conv& l) -> std::optional<std::string> {
            if (l.filters < 1) return "filters must be >= 1";
            if (l.kernel < 1) return "kernel must be >= 1";
            if (l.stride < 1) return "stride must be >= 1";
            if (l.padding < 0) return "padding must be >= 0";
            if (l.padding > (l.kernel - 1) / 2) return "padding must not exceed (kernel - 1) / 2";
            if (!valid_init(l.init)) return "gaussian stddev must be > 0";
            return std::nullopt;
          },
          [](const layer::Pool& l) -> std::optional<std::string> {
            if (l.kernel < 1) return "kernel must be >= 1";
            if (l.stride < 1) return "stride must be >= 1";
            return std::nullopt;
          },
          [](const layer::Relu&) -> std::optional<std::string> { return std::nullopt; },
          [](const layer::FullyConnected& l) -> std::optional<std::string> {
            if (l.units < 1) return "units must be >= 1";
            if (!valid_init(l.init)) return "gaussian stddev must be > 0";
            return std::nullopt;
          },
          [](const layer::SoftmaxOutput& l) -> std::optional<std::string> {
            if (l.classes < 2) return "classes must be >= 2";
            return std::nullopt;
          },
      },
      kind);
}

int window_out(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  // floor division; span may be negative
  const int q = span >= 0 ? span / stride : -((-span + stride - 1) / stride);
  return q + 1;
}

// Connection whose carried output is replaced while probing a splice.
struct EdgeOverride {
  int from;
  int to;
  Shape shape;
  bool dense;
};

// Fills `shapes` and `dense` (output already flattened) by position, or
// returns the first problem found.
std::optional<GenomeError> infer_shapes_ordered(const Graph& gr, const std::vector<int>& order,
                                                std::vector<Shape>& shapes, std::vector<char>& dense,
                                                const EdgeOverride* edge = nullptr) {
  shapes.assign(gr.ids.size(), Shape{});
  dense.assign(gr.ids.size(), 0);
  std::optional<GenomeError> err;
  for (int i : order) {
    const LayerGene& gene = *gr.genes[i];
    const GeneId id = gene.id;
    const auto preds = gr.preds[i];

    if (const auto* in = std::get_if<layer::Input>(&gene.kind)) {
      if (!preds.empty())
        return fail(GenomeErrc::bad_degree, id, "input gene has incoming connections");
      shapes[i] = Shape{in->height, in->width, in->channels};
      continue;
    }
    if (preds.empty())
      return fail(GenomeErrc::disconnected_gene, id, gene_label(id) + " has no incoming connection");

    const bool overridden = edge != nullptr && edge->to == i;
    auto shape_from = [&](int p) { return overridden && p == edge->from ? edge->shape : shapes[p]; };
    auto dense_from = [&](int p) { return overridden && p == edge->from ? edge->dense : dense[p] != 0; };
    const Shape in = shape_from(preds.front());
    bool in_dense = false;
    for (int p : preds) {
      if (shape_from(p) != in)
        return fail(GenomeErrc::incompatible_merge, id, gene_label(id) + " merges inputs of different shapes");
      in_dense = in_dense || dense_from(p);
    }

    Shape out = std::visit(
        overloaded{
            [&](const layer::Input&) -> Shape { return in; },
            [&](const layer::Conv& l) -> Shape {
              if (in_dense) {
                err = fail(GenomeErrc::spatial_after_dense, id,
                           "convolution after a fully connected layer");
                return Shape{};
              }
              return Shape{window_out(in.height, l.kernel, l.stride, l.padding),
                           window_out(in.width, l.kernel, l.stride, l.padding), l.filters};
            },
            [&](const layer::Pool& l) -> Shape {
              if (in_dense) {
                err = fail(GenomeErrc::spatial_after_dense, id,
                           "pooling after a fully connected layer");
                return Shape{};
              }
              return Shape{window_out(in.height, l.kernel, l.stride, 0),
                           window_out(in.width, l.kernel, l.stride, 0), in.channels};
            },
            [&](const layer::Relu&) -> Shape { return in; },
            [&](const layer::FullyConnected& l) -> Shape { return Shape{1, 1, l.units}; },
            [&](const layer::SoftmaxOutput& l) -> Shape {
              if (preds.size() != 1) {
                err = fail(GenomeErrc::head_mismatch, id, "softmax output must have one input");
                return Shape{};
              }
              const LayerGene& head = *gr.genes[preds.front()];
              const auto* fc = std::get_if<layer::FullyConnected>(&head.kind);
              if (fc == nullptr || fc->units != l.classes) {
                err = fail(GenomeErrc::head_mismatch, id,
                           "softmax output must be fed by a fully connected layer with one "
                           "unit per class");
                return Shape{};
              }
              return Shape{1, 1, l.classes};
            },
        },
        gene.kind);

    if (err) return err;
    if (out.height < 1 || out.width < 1 || out.channels < 1)
      return fail(GenomeErrc::non_positive_dimension, id,
                  gene_label(id) + " produces a " + std::to_string(out.height) + "x" +
                     std::to_string(out.width) + "x" + std::to_string(out.channels) + " output");
    if (std::holds_alternative<layer::FullyConnected>(gene.kind) ||
        std::holds_alternative<layer::SoftmaxOutput>(gene.kind) || in_dense)
      dense[i] = 1;
    shapes[i] = out;
  }
  return std::nullopt;
}

// What a successful check learned about the graph, reusable by callers.
struct Analysis {
  Graph gr;
  std::vector<int> order;
  std::vector<Shape> shapes;
  std::vector<char> dense;
};

std::optional<GenomeError> check_impl(const Genome& g, Analysis& a) {
  try {
    std::vector<GeneId> ids;
    ids.reserve(g.genes.size());
    for (const auto& gene : g.genes) ids.push_back(gene.id);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
      return fail(GenomeErrc::duplicate_id, *dup, "duplicate " + gene_label(*dup));

    if (g.fitness && !(*g.fitness >= 0.0 && *g.fitness <= 1.0))
      return fail(GenomeErrc::invalid_fitness, std::nullopt, "fitness must lie in [0, 1]");

    for (const auto& gene : g.genes)
      if (auto problem = hyperparameter_problem(gene.kind))
        return fail(GenomeErrc::invalid_hyperparameter, gene.id, gene_label(gene.id) + ": " + *problem);

    auto known = [&](GeneId id) { return std::binary_search(ids.begin(), ids.end(), id); };
    for (const auto& c : g.connections) {
      if (!known(c.from))
        return fail(GenomeErrc::missing_endpoint, c.from,
                    "connection references unknown " + gene_label(c.from));
      if (!known(c.to))
        return fail(GenomeErrc::missing_endpoint, c.to,
                    "connection references unknown " + gene_label(c.to));
      if (c.from == c.to) return fail(GenomeErrc::self_loop, c.from, gene_label(c.from) + " loops");
    }
    {
      // (from, to, position); report the earliest repeated connection
      std::vector<std::tuple<GeneId, GeneId, std::size_t>> edges;
      edges.reserve(g.connections.size());
      for (std::size_t k = 0; k < g.connections.size(); ++k)
        edges.emplace_back(g.connections[k].from, g.connections[k].to, k);
      std::sort(edges.begin(), edges.end());
      std::optional<std::size_t> repeat;
      for (std::size_t k = 1; k < edges.size(); ++k)
        if (std::get<0>(edges[k]) == std::get<0>(edges[k - 1]) && std::get<1>(edges[k]) == std::get<1>(edges[k - 1]))
          repeat = std::min(repeat.value_or(std::get<2>(edges[k])), std::get<2>(edges[k]));
      if (repeat) return fail(GenomeErrc::duplicate_connection, g.connections[*repeat].to, "duplicate connection");
    }

    std::vector<GeneId> inputs;
    std::vector<GeneId> outputs;
    for (const auto& gene : g.genes) {
      if (std::holds_alternative<layer::Input>(gene.kind)) inputs.push_back(gene.id);
      if (std::holds_alternative<layer::SoftmaxOutput>(gene.kind)) outputs.push_back(gene.id);
    }
    if (inputs.empty()) return fail(GenomeErrc::missing_input, std::nullopt, "no input gene");
    if (inputs.size() > 1) return fail(GenomeErrc::multiple_inputs, inputs[1], "more than one input gene");
    if (outputs.empty()) return fail(GenomeErrc::missing_output, std::nullopt, "no softmax output gene");
    if (outputs.size() > 1)
      return fail(GenomeErrc::multiple_outputs, outputs[1], "more than one softmax output gene");

    a.gr = graph(g);
    const Graph& gr = a.gr;
    const int input = gr.index(inputs[0]);
    const int output = gr.index(outputs[0]);
    if (!gr.preds[input].empty())
      return fail(GenomeErrc::bad_degree, inputs[0], "input gene has incoming connections");
    if (!gr.succs[output].empty())
      return fail(GenomeErrc::bad_degree, outputs[0], "softmax output gene has outgoing connections");

    auto order = kahn(gr);
    if (!order) return fail(GenomeErrc::cycle_detected, std::nullopt, "connection graph has a cycle");
    a.order = std::move(*order);

    // Every gene must lie on an input -> output path.
    auto reach = [&](int start, const Adjacency& edges) {
      std::vector<char> seen(gr.ids.size(), 0);
      std::vector<int> stack{start};
      seen[start] = 1;
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int next : edges[i])
          if (!seen[next]) {
            seen[next] = 1;
            stack.push_back(next);
          }
      }
      return seen;
    };
    const auto forward = reach(input, gr.succs);
    const auto backward = reach(output, gr.preds);
    for (int i : a.order)
      if (!forward[i] || !backward[i])
        return fail(GenomeErrc::disconnected_gene, gr.ids[i],
                    gene_label(gr.ids[i]) + " is not on a path from input to output");

    if (auto e = infer_shapes_ordered(gr, a.order, a.shapes, a.dense)) return e;
  } catch (const GenomeError& e) {
    return e;
  }
  return std::nullopt;
}

// ---- descriptor document ---------------------------------------------------

using ojson = nlohmann::ordered_json;

ojson init_to_json(const InitScheme& s) {
  return std::visit(overloaded{
                        [](const init::Gaussian& x) {
                          return ojson{{"scheme", "gaussian"}, {"stddev", x.stddev}};
                        },
                        [](const init::UniformFanIn&) { return ojson{{"scheme", "uniform_fan_in"}}; },
                        [](const init::GaussianFanAvg&) { return ojson{{"scheme", "gaussian_fan_avg"}}; },
                    },
                    s);
}

ojson params_to_json(const LayerKind& kind) {
  return std::visit(
      overloaded{
          [](const layer::Input& l) {
            return ojson{{"height", l.height}, {"width", l.width}, {"channels", l.channels}};
          },
          [](const layer::Conv& l) {
            return ojson{{"filters", l.filters}, {"kernel", l.kernel},   {"stride", l.stride},
                         {"padding", l.padding}, {"init", init_to_json(l.init)}};
          },
          [](const layer::Pool& l) {
            return ojson{{"kernel", l.kernel},
                         {"stride", l.stride},
                         {"mode", l.mode == PoolMode::max ? "max" : "average"}};
          },
          [](const layer::Relu&) { return ojson::object(); },
          [](const layer::FullyConnected& l) {
            return ojson{{"units", l.units}, {"init", init_to_json(l.init)}};
          },
          [](const layer::SoftmaxOutput& l) { return ojson{{"classes", l.classes}}; },
      },
      kind);
}

struct DocReader {
  [[noreturn]] void error(const std::string& reason) const { throw ParseError(0, reason); }

  void expect_keys(const ojson& obj, std::initializer_list<std::string_view> allowed,
                   const std::string& where) const {
    if (!obj.is_object()) error(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        error("unknown field '" + key + "' in " + where);
    }
    for (auto key : allowed)
      if (!obj.contains(std::string(key))) error("missing field '" + std::string(key) + "' in " + where);
  }

  int integer(const ojson& obj, const char* key, const std::string& where) const {
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) error(std::string("field '") + key + "' in " + where + " must be an integer");
    const auto x = v.get<long long>();
    if (x < INT32_MIN || x > INT32_MAX) error(std::string("field '") + key + "' out of range");
    return static_cast<int>(x);
  }

  InitScheme init(const ojson& obj, const std::string& where) const {
    if (!obj.is_object() || !obj.contains("scheme") || !obj["scheme"].is_string())
      error("init in " + where + " needs a string 'scheme'");
    const auto scheme = obj["scheme"].get<std::string>();
    if (scheme == "gaussian") {
      expect_keys(obj, {"scheme", "stddev"}, where + " init");
      if (!obj["stddev"].is_number()) error("gaussian stddev must be a number");
      return init::Gaussian{obj["stddev"].get<double>()};
    }
    if (scheme == "uniform_fan_in") {
      expect_keys(obj, {"scheme"}, where + " init");
      return init::UniformFanIn{};
    }
    if (scheme == "gaussian_fan_avg") {
      expect_keys(obj, {"scheme"}, where + " init");
      return init::GaussianFanAvg{};
    }
    error("unknown init scheme '" + scheme + "'");
  }

  LayerKind kind(const std::string& name, const ojson& p, const std::string& where) const {
    if (name == "input") {
      expect_keys(p, {"height", "width", "channels"}, where);
      return layer::Input{integer(p, "height", where), integer(p, "width", where),
                          integer(p, "channels", where)};
    }
    if (name == "conv") {
      expect_keys(p, {"filters", "kernel", "stride", "padding", "init"}, where);
      return layer::Conv{integer(p, "filters", where), integer(p, "kernel", where),
                         integer(p, "stride", where), integer(p, "padding", where),
                         init(p["init"], where)};
    }
    if (name == "pool") {
      expect_keys(p, {"kernel", "stride", "mode"}, where);
      const auto& mode = p["mode"];
      if (!mode.is_string() || (mode != "max" && mode != "average"))
        error("pool mode in " + where + " must be \"max\" or \"average\"");
      return layer::Pool{integer(p, "kernel", where), integer(p, "stride", where),
                         mode == "max" ? PoolMode::max : PoolMode::average};
    }
    if (name == "relu") {
      expect_keys(p, {}, where);
      return layer::Relu{};
    }
    if (name == "fully_connected") {
      expect_keys(p, {"units", "init"}, where);
      return layer::FullyConnected{integer(p, "units", where), init(p["init"], where)};
    }
    if (name == "softmax_output") {
      expect_keys(p, {"classes"}, where);
      return layer::SoftmaxOutput{integer(p, "classes", where)};
    }
    error("unknown layer kind '" + name + "' in " + where);
  }
};

int line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::string_view kind_name(const LayerKind& kind) {
  return std::visit(overloaded{
                        [](const layer::Input&) { return std::string_view("input"); },
                        [](const layer::Conv&) { return std::string_view("conv"); },
                        [](const layer::Pool&) { return std::string_view("pool"); },
                        [](const layer::Relu&) { return std::string_view("relu"); },
                        [](const layer::FullyConnected&) { return std::string_view("fully_connected"); },
                        [](const layer::SoftmaxOutput&) { return std::string_view("softmax_output"); },
                    },
                    kind);
}

std::string_view to_string(GenomeErrc code) {
  switch (code) {
    case GenomeErrc::non_positive_dimension: return "NonPositiveDimension";
    case GenomeErrc::disconnected_gene: return "DisconnectedGene";
    case GenomeErrc::cycle_detected: return "CycleDetected";
    case GenomeErrc::missing_input: return "MissingInput";
    case GenomeErrc::missing_output: return "MissingOutput";
    case GenomeErrc::multiple_inputs: return "MultipleInputs";
    case GenomeErrc::multiple_outputs: return "MultipleOutputs";
    case GenomeErrc::bad_degree: return "BadDegree";
    case GenomeErrc::invalid_fitness: return "InvalidFitness";
    case GenomeErrc::duplicate_id: return "DuplicateId";
    case GenomeErrc::duplicate_connection: return "DuplicateConnection";
    case GenomeErrc::missing_endpoint: return "MissingEndpoint";
    case GenomeErrc::self_loop: return "SelfLoop";
    case GenomeErrc::invalid_hyperparameter: return "InvalidHyperparameter";
    case GenomeErrc::head_mismatch: return "HeadMismatch";
    case GenomeErrc::spatial_after_dense: return "SpatialAfterDense";
    case GenomeErrc::incompatible_merge: return "IncompatibleMerge";
  }
  return "Unknown";
}

GenomeError::GenomeError(GenomeErrc code, std::optional<GeneId> gene, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), gene_(gene) {}

ParseError::ParseError(int line, const std::string& reason)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + reason : reason),
      line_(line) {}

const LayerGene* Genome::find(GeneId id) const {
  for (const auto& gene : genes)
    if (gene.id == id) return &gene;
  return nullptr;
}

GeneId Genome::next_id() const {
  GeneId next = 0;
  for (const auto& gene : genes) next = std::max(next, gene.id + 1);
  return next;
}

Genome minimal_genome(Shape input, int classes) {
  Genome g;
  g.genes = {
      LayerGene{0, layer::Input{input.height, input.width, input.channels}},
      LayerGene{1, layer::FullyConnected{classes, init::GaussianFanAvg{}}},
      LayerGene{2, layer::SoftmaxOutput{classes}},
  };
  g.connections = {{0, 1}, {1, 2}};
  return g;
}

std::vector<GeneId> topo_order(const Genome& g) {
  const Graph gr = graph(g);
  const auto order = kahn(gr);
  if (!order) throw fail(GenomeErrc::cycle_detected, std::nullopt, "connection graph has a cycle");
  std::vector<GeneId> ids;
  ids.reserve(order->size());
  for (int i : *order) ids.push_back(gr.ids[i]);
  return ids;
}

std::optional<Shape> layer_output(const LayerKind& kind, Shape in) {
  if (hyperparameter_problem(kind)) return std::nullopt;
  Shape out = in;
  if (const auto* c = std::get_if<layer::Conv>(&kind))
    out = {window_out(in.height, c->kernel, c->stride, c->padding), window_out(in.width, c->kernel, c->stride, c->padding),
           c->filters};
  else if (const auto* p = std::get_if<layer::Pool>(&kind))
    out = {window_out(in.height, p->kernel, p->stride, 0), window_out(in.width, p->kernel, p->stride, 0), in.channels};
  else if (const auto* f = std::get_if<layer::FullyConnected>(&kind))
    out = {1, 1, f->units};
  else if (const auto* s = std::get_if<layer::SoftmaxOutput>(&kind))
    out = {1, 1, s->classes};
  else if (const auto* i = std::get_if<layer::Input>(&kind))
    out = {i->height, i->width, i->channels};
  if (out.height < 1 || out.width < 1 || out.channels < 1) return std::nullopt;
  return out;
}

ShapeMap infer_shapes(const Genome& g) {
  const Graph gr = graph(g);
  const auto order = kahn(gr);
  if (!order) throw fail(GenomeErrc::cycle_detected, std::nullopt, "connection graph has a cycle");
  std::vector<Shape> shapes;
  std::vector<char> dense;
  if (auto e = infer_shapes_ordered(gr, *order, shapes, dense)) throw *e;
  ShapeMap out;
  for (std::size_t i = 0; i < shapes.size(); ++i) out.emplace_hint(out.end(), gr.ids[i], shapes[i]);
  return out;
}

std::optional<GenomeError> check(const Genome& g) {
  Analysis a;
  return check_impl(g, a);
}

struct SpliceProbe::State {
  Analysis a;
  EdgeOverride edge{};
  std::optional<int> head_classes;  // set when `at.to` is the softmax output
  std::map<std::tuple<int, int, int, bool>, bool> downstream;
  std::vector<Shape> scratch_shapes;
  std::vector<char> scratch_dense;
};

SpliceProbe::SpliceProbe(const Genome& g, ConnectionGene at) : state_(std::make_unique<State>()) {
  State& st = *state_;
  if (auto err = check_impl(g, st.a)) throw *err;
  const Graph& gr = st.a.gr;
  const int from = gr.index(at.from);
  const int to = gr.index(at.to);
  const auto succs = from < 0 ? std::span<const int>{} : gr.succs[from];
  if (to < 0 || !std::binary_search(succs.begin(), succs.end(), to))
    throw fail(GenomeErrc::missing_endpoint, at.to, "splice point is not a connection");
  st.edge.from = from;
  st.edge.to = to;
  if (const auto* out = std::get_if<layer::SoftmaxOutput>(&gr.genes[to]->kind)) st.head_classes = out->classes;
}

SpliceProbe::~SpliceProbe() = default;
SpliceProbe::SpliceProbe(SpliceProbe&&) noexcept = default;
SpliceProbe& SpliceProbe::operator=(SpliceProbe&&) noexcept = default;

Shape SpliceProbe::input() const { return state_->a.shapes[state_->edge.from]; }

bool SpliceProbe::accepts(std::span<const LayerKind> chain) {
  State& st = *state_;
  Shape shape = st.a.shapes[st.edge.from];
  bool dense = st.a.dense[st.edge.from] != 0;
  for (const auto& kind : chain) {
    if (std::holds_alternative<layer::Input>(kind) || std::holds_alternative<layer::SoftmaxOutput>(kind)) return false;
    if (dense && (std::holds_alternative<layer::Conv>(kind) || std::holds_alternative<layer::Pool>(kind))) return false;
    const auto next = layer_output(kind, shape);
    if (!next) return false;
    shape = *next;
    dense = dense || std::holds_alternative<layer::FullyConnected>(kind);
  }
  if (st.head_classes && !chain.empty()) {
    const auto* fc = std::get_if<layer::FullyConnected>(&chain.back());
    if (fc == nullptr || fc->units != *st.head_classes) return false;
  }
  const auto key = std::tuple{shape.height, shape.width, shape.channels, dense};
  if (auto it = st.downstream.find(key); it != st.downstream.end()) return it->second;
  EdgeOverride edge = st.edge;
  edge.shape = shape;
  edge.dense = dense;
  const bool ok = !infer_shapes_ordered(st.a.gr, st.a.order, st.scratch_shapes, st.scratch_dense, &edge);
  st.downstream.emplace(key, ok);
  return ok;
}

void validate(const Genome& g) {
  Analysis a;
  if (auto err = check_impl(g, a)) throw *err;
}

std::string serialize(const Genome& g) {
  validate(g);
  ojson doc;
  ojson genes = ojson::array();
  for (const auto& gene : g.genes)
    genes.push_back(ojson{{"id", gene.id}, {"kind", kind_name(gene.kind)}, {"params", params_to_json(gene.kind)}});
  ojson connections = ojson::array();
  for (const auto& c : g.connections) connections.push_back(ojson{{"from", c.from}, {"to", c.to}});
  doc["genes"] = std::move(genes);
  doc["connections"] = std::move(connections);
  doc["fitness"] = g.fitness ? ojson(*g.fitness) : ojson(nullptr);
  doc["lineage"] = g.lineage;
  return doc.dump(2) + "\n";
}

Genome deserialize(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_at(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }

  DocReader r;
  r.expect_keys(doc, {"genes", "connections", "fitness", "lineage"}, "genome");
  if (!doc["genes"].is_array()) r.error("'genes' must be an array");
  if (!doc["connections"].is_array()) r.error("'connections' must be an array");

  Genome g;
  for (std::size_t i = 0; i < doc["genes"].size(); ++i) {
    const auto& item = doc["genes"][i];
    const std::string where = "genes[" + std::to_string(i) + "]";
    r.expect_keys(item, {"id", "kind", "params"}, where);
    if (!item["id"].is_number_unsigned() || item["id"].get<std::uint64_t>() > UINT32_MAX)
      r.error(where + " id must be a non-negative 32-bit integer");
    if (!item["kind"].is_string()) r.error(where + " kind must be a string");
    g.genes.push_back(LayerGene{item["id"].get<GeneId>(),
                                r.kind(item["kind"].get<std::string>(), item["params"], where)});
  }
  for (std::size_t i = 0; i < doc["connections"].size(); ++i) {
    const auto& item = doc["connections"][i];
    const std::string where = "connections[" + std::to_string(i) + "]";
    r.expect_keys(item, {"from", "to"}, where);
    for (const char* key : {"from", "to"})
      if (!item[key].is_number_unsigned() || item[key].get<std::uint64_t>() > UINT32_MAX)
        r.error(where + " endpoints must be non-negative 32-bit integers");
    g.connections.push_back(ConnectionGene{item["from"].get<GeneId>(), item["to"].get<GeneId>()});
  }
  if (doc["fitness"].is_null()) {
    g.fitness = std::nullopt;
  } else if (doc["fitness"].is_number()) {
    g.fitness = doc["fitness"].get<double>();
  } else {
    r.error("'fitness' must be a number or null");
  }
  g.lineage = r.integer(doc, "lineage", "genome");

  validate(g);
  return g;
}

Genome load_genome(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open genome file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

void save_genome(const Genome& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write genome file " + path);
  out << serialize(g);
}

}  // namespace dndx
