#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dndx/config.hpp"
#include "dndx/hash.hpp"
#include "dndx/image.hpp"
#include "dndx/rng.hpp"

using namespace dndx;
namespace fs = std::filesystem;

TEST_CASE("empty config gives the shipped defaults") {
  const RunConfig cfg = parse_config("{}");
  CHECK(cfg.seed == 1);
  CHECK(cfg.evolution.population_size == 50);
  CHECK(cfg.evolution.max_generations == 10);
  CHECK(cfg.solver == SolverConfig{});
  CHECK(cfg.evolution.rates == MutationRates{});
  CHECK(cfg.evolution.ranges == HyperparameterRanges{});
  CHECK(cfg.pipeline == PipelineConfig{});
}

TEST_CASE("config fields are read and dumped canonically") {
  const RunConfig cfg = parse_config(R"({
    "seed": 42,
    "evolution": {"population_size": 20, "max_generations": 8},
    "solver": {"epochs": 3, "base_lr": 0.02},
    "mutation_rates": {"add_relu": 0.1},
    "ranges": {"conv_filters": [4, 8], "pool_mode": ["average"], "init": [{"scheme": "gaussian", "stddev": 0.05}]},
    "pipeline": {"band_low": 50}
  })");
  CHECK(cfg.seed == 42);
  CHECK(cfg.evolution.population_size == 20);
  CHECK(cfg.solver.epochs == 3);
  CHECK(cfg.solver.base_lr == 0.02);
  CHECK(cfg.evolution.rates.add_relu == 0.1);
  CHECK(cfg.evolution.ranges.conv_filters == std::vector<int>{4, 8});
  CHECK(cfg.evolution.ranges.pool_mode == std::vector<PoolMode>{PoolMode::average});
  CHECK(cfg.pipeline.band_low == 50.0f);

  const std::string dumped = dump_config(cfg);
  CHECK(dump_config(parse_config(dumped)) == dumped);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config(R"({"solver": {"epoch": 5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"solver": {"lr_policy": "step"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"evolution": {"population_size": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mutation_rates": {"add_relu": 2}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("seed override from the environment") {
  RunConfig cfg;
  ::setenv("DNDX_SEED", "77", 1);
  apply_seed_override(cfg);
  CHECK(cfg.seed == 77);
  CHECK(cfg.evolution.seed == 77);
  ::setenv("DNDX_SEED", "7x", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg), ConfigError);
  ::setenv("DNDX_SEED", "-3", 1);
  CHECK_THROWS_AS(apply_seed_override(cfg), ConfigError);
  ::unsetenv("DNDX_SEED");
  apply_seed_override(cfg);
  CHECK(cfg.seed == 77);
}

TEST_CASE("image files") {
  const auto dir = fs::temp_directory_path() / "dndx_image_test";
  fs::create_directories(dir);
  GrayImage img(5, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(i * 17);
  const auto pgm = (dir / "a.pgm").string();
  write_pgm(pgm, img);
  CHECK(read_pgm(pgm) == img);
  CHECK(read_image(pgm) == img);

  {
    std::ofstream out(dir / "b.pgm");
    out << "P2\n# comment\n2 2\n255\n0 10\n20 255\n";
  }
  const GrayImage ascii = read_pgm((dir / "b.pgm").string());
  CHECK(ascii.pixels == std::vector<float>{0, 10, 20, 255});

  RgbImage rgb{2, 1, {10, 10, 10, 200, 200, 200}};
  const auto png = (dir / "c.png").string();
  write_png(png, rgb);
  const GrayImage back = read_image(png);
  CHECK(back.pixels == std::vector<float>{10, 200});

  {
    std::ofstream out(dir / "d.pgm");
    out << "P5\n4 4\n255\nxx";
  }
  CHECK_THROWS_AS(read_pgm((dir / "d.pgm").string()), ImageError);
  CHECK_THROWS_AS(read_image((dir / "none.png").string()), ImageError);
  fs::remove_all(dir);
}

TEST_CASE("hashing and seeds") {
  Fnv1a h;
  CHECK(h.digest() == 0xCBF29CE484222325ULL);
  h.update("a");
  CHECK(h.digest() == 0xAF63DC4C8601EC8CULL);
  CHECK(hex64(0xABCULL) == "0000000000000abc");

  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  Rng r(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(r.uniform_index(7) < 7);
  }
}
