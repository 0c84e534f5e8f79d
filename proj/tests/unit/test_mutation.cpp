#include <doctest.h>

#include <algorithm>
#include <set>

#include "dndx/mutation.hpp"
#include "suites.hpp"

using namespace dndx;

namespace {

int count_kind(const Genome& g, std::size_t variant_index) {
  return static_cast<int>(
      std::count_if(g.genes.begin(), g.genes.end(), [&](const LayerGene& x) { return x.kind.index() == variant_index; }));
}

constexpr std::size_t kConv = 1;
constexpr std::size_t kPool = 2;
constexpr std::size_t kRelu = 3;

MutationRates zero_rates() { return {0.0, 0.0, 0.0, 0.0, 0.0}; }

}  // namespace

TEST_CASE("rates of zero leave the structure alone") {
  Genome g = minimal_genome({32, 32, 1}, 2);
  g.fitness = 0.5;
  Rng rng(1);
  const Genome out = mutate(g, zero_rates(), {}, rng);
  CHECK_FALSE(out.fitness.has_value());
  CHECK(out.genes == g.genes);
  CHECK(out.connections == g.connections);
}

TEST_CASE("forced single convolution injection") {
  MutationRates rates = zero_rates();
  rates.inject_convolution = 1.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Genome g = minimal_genome({256, 256, 1}, 2);
    const Genome out = mutate(g, rates, {}, rng);
    CHECK(count_kind(out, kConv) == 1);
    CHECK(out.genes.size() == 4);
    CHECK(is_valid(out));
  }
}

TEST_CASE("ReLU injection is always valid") {
  Rng rng(3);
  Genome g = minimal_genome({8, 8, 1}, 2);
  for (int i = 0; i < 30; ++i) {
    g = inject_node(g, NodeChoice::relu, {}, rng);
    REQUIRE(is_valid(g));
  }
  CHECK(count_kind(g, kRelu) == 30);
}

TEST_CASE("oversized kernel is repaired from the valid subset") {
  const Genome g = minimal_genome({8, 8, 1}, 2);
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const Genome out = insert_chain(g, {0, 1}, {layer::Conv{4, 11, 1, 0}}, {}, rng);
    REQUIRE(is_valid(out));
    const auto& conv = std::get<layer::Conv>(out.genes.back().kind);
    CHECK(conv.stride == 1);
    CHECK(conv.padding == 0);
    CHECK(conv.filters == 4);
    seen.insert(conv.kernel);
  }
  CHECK(seen == std::set<int>{1, 3, 5, 7});
}

TEST_CASE("pooling a 1x1 map is a no-op") {
  const Genome g = minimal_genome({1, 1, 1}, 2);
  Rng rng(0);
  CHECK(inject_node(g, NodeChoice::pool, {}, rng) == g);
  CHECK(inject_segment(g, {}, rng) == g);
}

TEST_CASE("segment on a minimal genome") {
  const Genome g = minimal_genome({256, 256, 1}, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Genome out = inject_segment(g, {}, rng);
    REQUIRE(out.genes.size() == 6);
    const auto order = topo_order(out);
    std::vector<std::size_t> kinds;
    for (GeneId id : order) kinds.push_back(out.find(id)->kind.index());
    CHECK(kinds == std::vector<std::size_t>{0, kConv, kRelu, kPool, 4, 5});
  }
}

TEST_CASE("spatial layers never go after the first dense layer") {
  Genome g = minimal_genome({16, 16, 1}, 2);
  const auto conv_sites = eligible_connections(g, NodeChoice::conv);
  REQUIRE(conv_sites.size() == 1);
  CHECK(conv_sites[0] == ConnectionGene{0, 1});
  CHECK(eligible_connections(g, NodeChoice::relu).size() == 1);
}

TEST_CASE("point mutation changes at most one field") {
  Genome g = minimal_genome({32, 32, 1}, 2);
  g.genes.push_back({3, layer::Conv{16, 3, 1, 1}});
  g.connections = {{0, 3}, {3, 1}, {1, 2}};
  REQUIRE(is_valid(g));
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const Genome out = point_mutate(g, {}, rng);
    REQUIRE(is_valid(out));
    CHECK(out.connections == g.connections);
    int changed_genes = 0;
    for (std::size_t i = 0; i < g.genes.size(); ++i) {
      if (out.genes[i] == g.genes[i]) continue;
      ++changed_genes;
      if (const auto* before = std::get_if<layer::Conv>(&g.genes[i].kind)) {
        const auto& after = std::get<layer::Conv>(out.genes[i].kind);
        const int diffs = (before->filters != after.filters) + (before->kernel != after.kernel) +
                          (before->stride != after.stride) + (before->padding != after.padding) +
                          (before->init != after.init);
        CHECK(diffs == 1);
      }
    }
    CHECK(changed_genes <= 1);
  }
}

TEST_CASE("the classifier head keeps its width") {
  const Genome g = minimal_genome({8, 8, 1}, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Genome out = point_mutate(g, {}, rng);
    CHECK(std::get<layer::FullyConnected>(out.find(1)->kind).units == 2);
    CHECK(is_valid(out));
  }
}

TEST_CASE("mutation fuzz keeps genomes valid") {
  const auto report = suites::mutation_fuzz(2000, 20, 17);
  CHECK(report.invalid == 0);
  CHECK(report.exceptions == 0);
  CHECK(report.steps == 40000);
}

TEST_CASE("mutation is deterministic under a seed") {
  Genome a = minimal_genome({64, 64, 1}, 2);
  Genome b = a;
  Rng ra(9), rb(9);
  for (int i = 0; i < 20; ++i) {
    a = mutate(a, {}, {}, ra);
    b = mutate(b, {}, {}, rb);
  }
  CHECK(a == b);
}

TEST_CASE("range and rate validation") {
  MutationRates r;
  r.point_mutate = 1.5;
  CHECK_THROWS(r.validate());
  HyperparameterRanges h;
  h.conv_kernel.clear();
  CHECK_THROWS(h.validate());
}
