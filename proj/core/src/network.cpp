#include "dndx/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "dndx/log.hpp"
#include "dndx/nn.hpp"

namespace dndx {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void add_into(Tensor& acc, const Tensor& x) {
  if (acc.size() == 0) {
    acc = x;
    return;
  }
  if (acc.dims() != x.dims()) throw ShapeMismatch("gradient accumulation shape mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

}  // namespace

std::size_t Network::index_of(GeneId id) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].id == id) return i;
  throw std::out_of_range("network has no layer for gene " + std::to_string(id));
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_)
    if (l.state) total += l.state->param_count();
  return total;
}

Network compile(const Genome& g, Rng& rng) {
  validate(g);
  const ShapeMap shapes = infer_shapes(g);
  const auto order = topo_order(g);

  Network net;
  net.genome_ = g;
  std::unordered_map<GeneId, std::size_t> index;
  for (std::size_t i = 0; i < order.size(); ++i) index[order[i]] = i;

  std::vector<std::vector<std::size_t>> inputs(order.size());
  for (const auto& c : g.connections) inputs[index.at(c.to)].push_back(index.at(c.from));
  for (auto& v : inputs) std::sort(v.begin(), v.end());

  for (std::size_t i = 0; i < order.size(); ++i) {
    const LayerGene& gene = *g.find(order[i]);
    NetworkLayer layer{gene.id, gene.kind, inputs[i], shapes.at(gene.id), std::nullopt};
    const Shape in = inputs[i].empty() ? Shape{} : shapes.at(order[inputs[i].front()]);
    std::visit(overloaded{
                   [&](const layer::Input& l) { net.input_shape_ = Shape{l.height, l.width, l.channels}; },
                   [&](const layer::Conv& l) {
                     const int fan_in = in.channels * l.kernel * l.kernel;
                     const int fan_out = l.filters * l.kernel * l.kernel;
                     Tensor w = init_weights(l.init, Dims{l.filters, in.channels, l.kernel, l.kernel}, fan_in,
                                             fan_out, rng);
                     layer.state.emplace(std::move(w), Tensor(Dims{l.filters, 1, 1, 1}));
                   },
                   [&](const layer::Pool&) {},
                   [&](const layer::Relu&) {},
                   [&](const layer::FullyConnected& l) {
                     const int fan_in = static_cast<int>(in.size());
                     Tensor w = init_weights(l.init, Dims{l.units, fan_in, 1, 1}, fan_in, l.units, rng);
                     layer.state.emplace(std::move(w), Tensor(Dims{l.units, 1, 1, 1}));
                   },
                   [&](const layer::SoftmaxOutput& l) {
                     net.classes_ = l.classes;
                     net.head_ = inputs[i].front();
                   },
               },
               gene.kind);
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

ForwardTrace Network::forward(const Tensor& x) const {
  const Dims want{x.dims().n, input_shape_.channels, input_shape_.height, input_shape_.width};
  if (x.dims() != want) throw ShapeMismatch("network input " + x.dims().str() + ", expected " + want.str());

  ForwardTrace trace;
  trace.outputs.resize(layers_.size());
  trace.merged_inputs.resize(layers_.size());
  trace.argmax.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const NetworkLayer& layer = layers_[i];
    if (std::holds_alternative<layer::Input>(layer.kind)) {
      trace.outputs[i] = x;
      continue;
    }
    const Tensor* in = &trace.outputs[layer.inputs.front()];
    if (layer.inputs.size() > 1) {
      Tensor sum = *in;
      for (std::size_t k = 1; k < layer.inputs.size(); ++k) add_into(sum, trace.outputs[layer.inputs[k]]);
      trace.merged_inputs[i] = std::move(sum);
      in = &trace.merged_inputs[i];
    }
    trace.outputs[i] = std::visit(
        overloaded{
            [&](const layer::Input&) { return *in; },
            [&](const layer::Conv& l) {
              return nn::conv2d_forward(*in, layer.state->weights, layer.state->bias, {l.kernel, l.stride, l.padding});
            },
            [&](const layer::Pool& l) {
              if (l.mode == PoolMode::average) return nn::avgpool_forward(*in, {l.kernel, l.stride});
              auto out = nn::maxpool_forward(*in, {l.kernel, l.stride});
              trace.argmax[i] = std::move(out.argmax);
              return std::move(out.y);
            },
            [&](const layer::Relu&) { return nn::relu_forward(*in); },
            [&](const layer::FullyConnected&) {
              return nn::fc_forward(*in, layer.state->weights, layer.state->bias);
            },
            [&](const layer::SoftmaxOutput&) { return nn::softmax(*in); },
        },
        layer.kind);
  }
  return trace;
}

BackwardResult Network::backward(const ForwardTrace& trace, const Tensor& dlogits) const {
  if (dlogits.dims() != trace.outputs[head_].dims()) throw ShapeMismatch("backward: dlogits shape mismatch");
  BackwardResult result;
  result.params.resize(layers_.size());
  result.output_grads.resize(layers_.size());
  result.output_grads[head_] = dlogits;

  for (std::size_t i = head_ + 1; i-- > 0;) {
    const NetworkLayer& layer = layers_[i];
    const Tensor& dy = result.output_grads[i];
    if (dy.size() == 0 || layer.inputs.empty()) continue;
    const Tensor& in = layer.inputs.size() > 1 ? trace.merged_inputs[i] : trace.outputs[layer.inputs.front()];

    Tensor dx = std::visit(
        overloaded{
            [&](const layer::Input&) { return Tensor(); },
            [&](const layer::Conv& l) {
              auto g = nn::conv2d_backward(in, layer.state->weights, dy, {l.kernel, l.stride, l.padding});
              result.params[i] = ParamGrad{std::move(g.dweights), std::move(g.dbias)};
              return std::move(g.dx);
            },
            [&](const layer::Pool& l) {
              if (l.mode == PoolMode::average) return nn::avgpool_backward(dy, in.dims(), {l.kernel, l.stride});
              return nn::maxpool_backward(dy, trace.argmax[i], in.dims());
            },
            [&](const layer::Relu&) { return nn::relu_backward(in, dy); },
            [&](const layer::FullyConnected&) {
              auto g = nn::fc_backward(in, layer.state->weights, dy);
              result.params[i] = ParamGrad{std::move(g.dweights), std::move(g.dbias)};
              return std::move(g.dx);
            },
            [&](const layer::SoftmaxOutput&) { return Tensor(); },
        },
        layer.kind);
    if (dx.size() == 0) continue;
    for (std::size_t src : layer.inputs) add_into(result.output_grads[src], dx);
  }
  return result;
}

std::vector<int> Network::predict(const Tensor& x) const {
  const ForwardTrace trace = forward(x);
  const Tensor& z = logits(trace);
  std::vector<int> out(static_cast<std::size_t>(z.dims().n));
  for (int b = 0; b < z.dims().n; ++b) {
    const auto row = z.item(b);
    out[b] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Tensor batch_of(const Dataset& data, std::span<const std::size_t> indices) {
  Tensor x(Dims{static_cast<int>(indices.size()), 1, data.height, data.width});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto img = data.image(indices[b]);
    std::copy(img.begin(), img.end(), x.item(static_cast<int>(b)).begin());
  }
  return x;
}

TrainResult train(Network& net, const Dataset& data, const SolverConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.size() == 0) throw DatasetError("training set is empty");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor x = batch_of(data, idx);
      labels.assign(idx.size(), 0);
      for (std::size_t b = 0; b < idx.size(); ++b) labels[b] = data.labels[idx[b]];

      const ForwardTrace trace = net.forward(x);
      auto loss = nn::softmax_cross_entropy(net.logits(trace), labels);
      if (!std::isfinite(loss.loss))
        throw NumericalDivergence("training loss became non-finite at iteration " + std::to_string(result.iterations));
      const BackwardResult grads = net.backward(trace, loss.dlogits);
      const double lr = inv_lr(result.iterations, cfg);
      for (std::size_t i = 0; i < net.layers().size(); ++i) {
        auto& layer = net.layers()[i];
        if (layer.state && grads.params[i]) sgd_step(*layer.state, grads.params[i]->dweights, grads.params[i]->dbias, lr, cfg);
      }
      ++result.iterations;
      epoch_loss += loss.loss;
      ++batches;
    }
    result.final_loss = epoch_loss / static_cast<double>(batches);
  }
  return result;
}

std::vector<int> predict(const Network& net, const Dataset& data) {
  constexpr std::size_t kChunk = 64;
  std::vector<int> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kChunk); ++i) idx.push_back(i);
    const auto part = net.predict(batch_of(data, idx));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw DatasetError("cannot score an empty split");
  const auto predicted = predict(net, data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Network train_genome(const Genome& g, const Dataset& train_set, const SolverConfig& cfg, std::uint64_t seed) {
  Rng init_rng(derive_seed(seed, 1));
  Network net = compile(g, init_rng);
  Rng order_rng(derive_seed(seed, 2));
  train(net, train_set, cfg, order_rng);
  return net;
}

double evaluate_fitness(const Genome& g, const DatasetSplit& data, const SolverConfig& cfg, std::uint64_t seed) {
  if (data.dev.size() == 0) throw DatasetError("development split is empty");
  try {
    const Network net = train_genome(g, data.train, cfg, seed);
    return accuracy(net, data.dev);
  } catch (const NumericalDivergence& e) {
    log_warning(std::string("candidate diverged, fitness 0: ") + e.what());
    return 0.0;
  }
}

}  // namespace dndx
