#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dndx/checkpoint.hpp"
#include "dndx/network.hpp"
#include "dndx/synthetic.hpp"
#include "oracles.hpp"
#include "suites.hpp"

using namespace dndx;
namespace fs = std::filesystem;

namespace {

Genome conv_fc(Shape in, int filters, int units) {
  Genome g;
  g.genes = {{0, layer::Input{in.height, in.width, in.channels}},
             {1, layer::Conv{filters, 3, 1, 1}},
             {2, layer::Relu{}},
             {3, layer::FullyConnected{units}},
             {4, layer::FullyConnected{2}},
             {5, layer::SoftmaxOutput{2}}};
  g.connections = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  return g;
}

fs::path scratch(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parameter counts") {
  Rng rng(1);
  const Network mnist = compile(minimal_genome({28, 28, 1}, 10), rng);
  int parameterized = 0;
  for (const auto& l : mnist.layers()) parameterized += l.state.has_value();
  CHECK(parameterized == 1);
  CHECK(mnist.param_count() == 784 * 10 + 10);
  CHECK(compile(minimal_genome({256, 256, 1}, 2), rng).param_count() == 131074);

  const Network n = compile(conv_fc({8, 8, 1}, 32, 1024), rng);
  CHECK(n.layers()[n.index_of(1)].state->param_count() == 320);
  CHECK(n.layers()[n.index_of(4)].state->param_count() == 2050);
  CHECK(n.head_index() == n.index_of(4));
}

TEST_CASE("forward matches the reference kernels") {
  Rng rng(2);
  const Network net = compile(conv_fc({6, 6, 1}, 3, 5), rng);
  Rng data(3);
  const Tensor x = oracle::dyadic({2, 1, 6, 6}, data);
  const ForwardTrace t = net.forward(x);
  const auto& conv = *net.layers()[net.index_of(1)].state;
  Tensor ref = oracle::conv2d(x, conv.weights, conv.bias, 1, 1);
  for (auto& v : ref.values()) v = std::max(v, 0.0f);
  const auto& fc1 = *net.layers()[net.index_of(3)].state;
  ref = oracle::fc(ref, fc1.weights, fc1.bias);
  const auto& fc2 = *net.layers()[net.index_of(4)].state;
  ref = oracle::fc(ref, fc2.weights, fc2.bias);
  const Tensor& logits = net.logits(t);
  REQUIRE(logits.dims() == ref.dims());
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(logits[i] == doctest::Approx(ref[i]).epsilon(1e-4));
}

TEST_CASE("merged inputs are summed") {
  Genome g = conv_fc({6, 6, 1}, 3, 5);
  g.genes.push_back({6, layer::Conv{3, 3, 1, 1}});
  g.connections.push_back({0, 6});
  g.connections.push_back({6, 2});
  REQUIRE(is_valid(g));
  Rng rng(4);
  const Network net = compile(g, rng);
  Rng data(5);
  const Tensor x = oracle::dyadic({1, 1, 6, 6}, data);
  const ForwardTrace t = net.forward(x);
  const Tensor& a = t.outputs[net.index_of(1)];
  const Tensor& b = t.outputs[net.index_of(6)];
  const Tensor& relu = t.outputs[net.index_of(2)];
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(relu[i] == std::max(0.0f, a[i] + b[i]));
}

TEST_CASE("compilation is deterministic and rejects invalid genomes") {
  Rng a(9), b(9);
  const Genome g = conv_fc({8, 8, 1}, 4, 8);
  std::ostringstream wa, wb;
  write_weights(compile(g, a), wa);
  write_weights(compile(g, b), wb);
  CHECK(wa.str() == wb.str());

  Genome bad = g;
  bad.connections.pop_back();
  Rng c(1);
  CHECK_THROWS_AS(compile(bad, c), GenomeError);
}

TEST_CASE("a constant predictor scores half on a balanced set") {
  SyntheticConfig sc;
  sc.count = 40;
  sc.size = 8;
  sc.square = 2;
  const DatasetSplit data = synthetic_dataset(sc);
  Rng rng(1);
  Network net = compile(minimal_genome({8, 8, 1}, 2), rng);
  auto& head = *net.layers()[net.head_index()].state;
  head.weights.fill(0.0f);
  head.bias.fill(0.0f);
  head.bias[1] = 1.0f;
  Dataset balanced;
  balanced.height = balanced.width = 8;
  int counts[2] = {0, 0};
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const auto label = data.train.labels[i];
    if (counts[label] < 10) {
      balanced.push_back(data.train.image(i), label);
      ++counts[label];
    }
  }
  REQUIRE(balanced.size() == 20);
  CHECK(accuracy(net, balanced) == 0.5);
}

TEST_CASE("training learns the planted square") {
  SyntheticConfig sc;
  sc.count = 400;
  sc.size = 16;
  sc.square = 4;
  sc.offset_stddev = 0.0f;
  sc.noise_stddev = 10.0f;
  const DatasetSplit data = synthetic_dataset(sc);
  SolverConfig cfg;
  cfg.epochs = 5;
  const double fit = evaluate_fitness(conv_fc({16, 16, 1}, 4, 16), data, cfg, 1);
  CHECK(fit >= 0.9);
  CHECK(evaluate_fitness(conv_fc({16, 16, 1}, 4, 16), data, cfg, 1) == fit);
  const Network trained = train_genome(conv_fc({16, 16, 1}, 4, 16), data.train, cfg, 1);
  CHECK(accuracy(trained, data.dev) == fit);
}

TEST_CASE("divergent training scores zero") {
  SyntheticConfig sc;
  sc.count = 40;
  sc.size = 8;
  sc.square = 2;
  const DatasetSplit data = synthetic_dataset(sc);
  SolverConfig cfg;
  cfg.base_lr = 1e30;
  cfg.epochs = 2;
  CHECK(evaluate_fitness(conv_fc({8, 8, 1}, 4, 8), data, cfg, 1) == 0.0);
}

TEST_CASE("weight checkpoints") {
  const auto report = suites::checkpoint_round_trips(50, 4);
  CHECK(report.identical == report.instances);

  Rng rng(1);
  Network net = compile(conv_fc({8, 8, 1}, 4, 8), rng);
  std::ostringstream out;
  write_weights(net, out);
  const std::string bytes = out.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_weights(net, truncated), CheckpointError);
  std::istringstream trailing(bytes + "x");
  CHECK_THROWS_AS(read_weights(net, trailing), CheckpointError);
  std::istringstream garbage("nope");
  CHECK_THROWS_AS(read_weights(net, garbage), CheckpointError);

  Rng other(2);
  Network wider = compile(conv_fc({8, 8, 1}, 5, 8), other);
  std::istringstream mismatch(bytes);
  CHECK_THROWS_AS(read_weights(wider, mismatch), CheckpointError);
}

TEST_CASE("model bundles") {
  const auto dir = scratch("dndx_bundle_test");
  Rng rng(3);
  const Network net = compile(conv_fc({8, 8, 1}, 4, 8), rng);
  export_bundle(dir.string(), net, {12.5, 3.0});
  CHECK(fs::exists(dir / "genome.json"));
  CHECK(fs::exists(dir / "weights.dndx"));
  CHECK(fs::exists(dir / "manifest.json"));
  const ModelBundle b = load_bundle(dir.string());
  CHECK(b.stats == NormalizationStats{12.5, 3.0});
  CHECK(b.network.param_count() == net.param_count());
  std::ostringstream wa, wb;
  write_weights(net, wa);
  write_weights(b.network, wb);
  CHECK(wa.str() == wb.str());

  fs::remove(dir / "weights.dndx");
  CHECK_THROWS(load_bundle(dir.string()));
  fs::remove_all(dir);
}

TEST_CASE("dataset files") {
  const auto dir = scratch("dndx_dataset_test");
  SyntheticConfig sc;
  sc.count = 30;
  sc.size = 8;
  sc.square = 2;
  DatasetSplit split = synthetic_dataset(sc);
  const auto path = (dir / "data.dnds").string();
  write_dataset(path, split);
  write_stats((dir / "stats.txt").string(), split.stats);
  CHECK(read_dataset(path) == split);

  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  }
  CHECK_THROWS_AS(read_dataset(path), DatasetError);
  CHECK_THROWS_AS(read_dataset((dir / "missing.dnds").string()), DatasetError);

  DatasetSplit lopsided = split;
  lopsided.train.pixels.resize(lopsided.train.pixels.size() - 64);
  lopsided.train.labels.pop_back();
  CHECK_THROWS_AS(write_dataset(path, lopsided), DatasetError);

  // Too few items for a non-empty dev split.
  DatasetSplit tiny;
  tiny.train.height = tiny.train.width = 8;
  for (int i = 0; i < 5; ++i) tiny.train.push_back(split.train.image(i), 0);
  write_dataset(path, tiny);
  CHECK_THROWS_AS(read_dataset(path), DatasetError);
  fs::remove_all(dir);
}
