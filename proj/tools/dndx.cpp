// dndx: preprocess, synth, evolve, train, eval, gradcam.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "dndx/checkpoint.hpp"
#include "dndx/config.hpp"
#include "dndx/evalstats.hpp"
#include "dndx/evolution.hpp"
#include "dndx/gradcam.hpp"
#include "dndx/hash.hpp"
#include "dndx/imgpipe.hpp"
#include "dndx/log.hpp"
#include "dndx/network.hpp"
#include "dndx/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dndx;
using ojson = nlohmann::ordered_json;

namespace {

/// Bad flags, missing inputs, invalid configuration: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) throw UsageError(std::string(what) + " not found: " + path);
}

RunConfig config_from(const std::string& path, std::optional<std::uint64_t> seed_flag) {
  RunConfig cfg;
  if (!path.empty()) {
    require_file(path, "config");
    cfg = load_config(path);
  }
  apply_seed_override(cfg);
  if (seed_flag) {
    cfg.seed = *seed_flag;
    cfg.evolution.seed = *seed_flag;
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// run.json: command, config snapshot and the hash of every file under `out`.
void write_provenance(const fs::path& out, const std::string& command, const RunConfig& cfg,
                      const std::map<std::string, std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(out))
    if (entry.is_regular_file() && entry.path().filename() != "run.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  ojson doc;
  doc["command"] = command;
  doc["seed"] = cfg.seed;
  doc["config"] = ojson::parse(dump_config(cfg));
  ojson in = ojson::object();
  for (const auto& [name, path] : inputs) in[name] = {{"path", path}, {"fnv1a64", file_hash(path)}};
  doc["inputs"] = in;
  ojson artifacts = ojson::object();
  for (const auto& f : files) artifacts[fs::relative(f, out).generic_string()] = file_hash(f.string());
  doc["artifacts"] = artifacts;
  write_text(out / "run.json", doc.dump(2) + "\n");
}

std::string gen_dir(int generation) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gen_%04d", generation);
  return buf;
}

std::string member_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "genome_%03zu.json", index);
  return buf;
}

// --- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  std::string input, manifest, out, config;
  std::optional<std::uint64_t> seed;
};

int cmd_preprocess(const PreprocessArgs& a) {
  require_dir(a.input, "input directory");
  require_file(a.manifest, "manifest");
  const RunConfig cfg = config_from(a.config, a.seed);
  const auto entries = read_manifest(a.manifest);

  std::vector<LabeledImage> raw;
  raw.reserve(entries.size());
  for (const auto& e : entries) {
    const fs::path p = fs::path(a.input) / e.filename;
    if (!fs::is_regular_file(p)) throw UsageError("manifest lists missing image: " + p.string());
    raw.push_back({read_image(p.string()), e.label});
  }
  const DatasetSplit split = build_dataset(std::move(raw), cfg.pipeline, cfg.seed);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_dataset(out.string(), split);
  write_stats((out.parent_path() / "stats.txt").string(), split.stats);
  std::cout << "wrote " << out.string() << ": train " << split.train.size() << ", dev " << split.dev.size()
            << ", test " << split.test.size() << ", hash " << hex64(dataset_hash(split)) << "\n";
  return 0;
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SyntheticConfig synth;
  std::optional<int> square;
};

int cmd_synth(SynthArgs a) {
  a.synth.square = a.square.value_or(std::max(1, a.synth.size / 4));
  try {
    a.synth.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const DatasetSplit split = synthetic_dataset(a.synth);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_dataset(out.string(), split);
  write_stats((out.parent_path() / "stats.txt").string(), split.stats);
  std::cout << "wrote " << out.string() << ": " << split.train.size() << "/" << split.dev.size() << "/"
            << split.test.size() << " (" << split.train.width << "x" << split.train.height << ")\n";
  return 0;
}

// --- evolve -------------------------------------------------------------------

struct EvolveArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
};

int cmd_evolve(const EvolveArgs& a) {
  require_file(a.data, "dataset");
  RunConfig cfg = config_from(a.config, a.seed);
  const DatasetSplit data = read_dataset(a.data);
  cfg.evolution.input = {data.train.height, data.train.width, 1};
  cfg.evolution.classes = 2;
  cfg.evolution.seed = cfg.seed;

  const fs::path out(a.out);
  fs::create_directories(out / "generations");
  std::ofstream history(out / "history.csv", std::ios::binary);
  history << "generation,best_fitness,mean_fitness\n";

  RunOptions options;
  options.jobs = a.jobs;
  options.on_generation = [&](const Population& p, const GenerationRecord& r) {
    history << r.generation << ',' << fmt(r.best_fitness) << ',' << fmt(r.mean_fitness) << '\n';
    history.flush();
    const fs::path dir = out / "generations" / gen_dir(r.generation);
    fs::create_directories(dir);
    const auto members = p.genomes();
    for (std::size_t i = 0; i < members.size(); ++i) save_genome(members[i], (dir / member_file(i)).string());
    save_genome(*p.best_genome, (dir / "best.json").string());
    log_info("generation " + std::to_string(r.generation) + ": best " + fmt(r.best_fitness) + ", mean " +
             fmt(r.mean_fitness) + ", species " + std::to_string(p.species.size()));
  };

  const EvolutionResult result = run_neat(
      cfg.evolution,
      [&](const Genome& g, std::uint64_t seed) { return evaluate_fitness(g, data, cfg.solver, seed); }, options);
  history.close();

  save_genome(result.best, (out / "best.json").string());
  const Network best = train_genome(result.best, data.train, cfg.solver, result.best_seed);
  export_bundle((out / "best").string(), best, data.stats);
  write_provenance(out, "evolve", cfg, {{"data", a.data}});
  std::cout << "best fitness " << fmt(*result.best.fitness) << " after " << result.history.size()
            << " generations; bundle at " << (out / "best").string() << "\n";
  return 0;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string genome, data, out, config;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  require_file(a.genome, "genome");
  require_file(a.data, "dataset");
  const RunConfig cfg = config_from(a.config, a.seed);
  const Genome g = load_genome(a.genome);
  const DatasetSplit data = read_dataset(a.data);
  const Network net = train_genome(g, data.train, cfg.solver, cfg.seed);
  export_bundle(a.out, net, data.stats);
  write_provenance(a.out, "train", cfg, {{"genome", a.genome}, {"data", a.data}});
  std::cout << "dev accuracy " << fmt(accuracy(net, data.dev)) << "; bundle at " << a.out << "\n";
  return 0;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string model, data, split = "test", out;
};

int cmd_eval(const EvalArgs& a) {
  require_dir(a.model, "model bundle");
  require_file(a.data, "dataset");
  const ModelBundle bundle = load_bundle(a.model);
  const DatasetSplit data = read_dataset(a.data);
  const Dataset& set = a.split == "dev" ? data.dev : data.test;

  const auto predicted = predict(bundle.network, set);
  const std::vector<int> actual(set.labels.begin(), set.labels.end());
  const ContingencyTable table = tabulate(predicted, actual);
  std::cout << report_text(table);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / ("report_" + a.split + ".csv"), report_csv(table));
    write_text(fs::path(a.out) / ("report_" + a.split + ".txt"), report_text(table));
  }
  return 0;
}

// --- gradcam ------------------------------------------------------------------

struct GradcamArgs {
  std::string model, image, out, config;
  std::optional<GeneId> layer;
  int class_index = 1;
  bool raw = false;
};

int cmd_gradcam(const GradcamArgs& a) {
  require_dir(a.model, "model bundle");
  require_file(a.image, "image");
  const RunConfig cfg = config_from(a.config, std::nullopt);
  const ModelBundle bundle = load_bundle(a.model);
  const Shape in = bundle.network.input_shape();
  if (a.class_index < 0 || a.class_index >= bundle.network.classes())
    throw UsageError("--class must lie in [0, " + std::to_string(bundle.network.classes()) + ")");

  PipelineConfig pc = cfg.pipeline;
  pc.target_width = in.width;
  pc.target_height = in.height;
  const GrayImage source = read_image(a.image);
  const GrayImage prepared = a.raw ? resize(source, in.width, in.height) : preprocess_image(source, pc);

  Tensor x(Dims{1, 1, in.height, in.width});
  for (std::size_t i = 0; i < prepared.pixels.size(); ++i)
    x[i] = static_cast<float>((prepared.pixels[i] - bundle.stats.mean) / bundle.stats.stddev);

  const Heatmap map = gradcam(bundle.network, x, a.layer, a.class_index);
  fs::create_directories(a.out);
  const std::string stem = fs::path(a.image).stem().string();
  write_png((fs::path(a.out) / (stem + ".heat.png")).string(), overlay(map, prepared));
  write_pgm((fs::path(a.out) / (stem + ".heat.pgm")).string(), heatmap_image(map));
  std::cout << "wrote " << stem << ".heat.png and " << stem << ".heat.pgm (" << map.width << "x" << map.height
            << " map)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepNEAT-Dx architecture search for binary image classification"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Build a dataset file from images and a manifest");
  c_pre->add_option("--input", pre.input, "Image directory")->required();
  c_pre->add_option("--manifest", pre.manifest, "CSV with filename,label")->required();
  c_pre->add_option("--out", pre.out, "Dataset file to write")->required();
  c_pre->add_option("--config", pre.config, "Run configuration (pipeline section)");
  c_pre->add_option("--seed", pre.seed, "Split seed");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Write the planted-square synthetic dataset");
  c_syn->add_option("--out", syn.out, "Dataset file to write")->required();
  c_syn->add_option("--seed", syn.synth.seed, "Generator and split seed");
  c_syn->add_option("--count", syn.synth.count, "Number of images");
  c_syn->add_option("--size", syn.synth.size, "Image side in pixels");
  c_syn->add_option("--square", syn.square, "Planted square side (default: a quarter of the image side)");

  EvolveArgs evo;
  auto* c_evo = app.add_subcommand("evolve", "Run the architecture search");
  c_evo->add_option("--config", evo.config, "Run configuration");
  c_evo->add_option("--data", evo.data, "Dataset file")->required();
  c_evo->add_option("--out", evo.out, "Output directory")->required();
  c_evo->add_option("--seed", evo.seed, "Master seed (overrides config and DNDX_SEED)");
  c_evo->add_option("--jobs", evo.jobs, "Parallel fitness evaluations")->check(CLI::PositiveNumber);

  TrainArgs trn;
  auto* c_trn = app.add_subcommand("train", "Train one genome and export a model bundle");
  c_trn->add_option("--genome", trn.genome, "Genome descriptor")->required();
  c_trn->add_option("--data", trn.data, "Dataset file")->required();
  c_trn->add_option("--out", trn.out, "Bundle directory")->required();
  c_trn->add_option("--config", trn.config, "Run configuration (solver section)");
  c_trn->add_option("--seed", trn.seed, "Training seed");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Contingency table and diagnostic statistics");
  c_ev->add_option("--model", ev.model, "Bundle directory")->required();
  c_ev->add_option("--data", ev.data, "Dataset file")->required();
  c_ev->add_option("--split", ev.split, "dev or test")->check(CLI::IsMember({"dev", "test"}));
  c_ev->add_option("--out", ev.out, "Directory for report_<split>.csv / .txt");

  GradcamArgs gc;
  std::optional<unsigned> layer;
  auto* c_gc = app.add_subcommand("gradcam", "Heatmap and overlay for one image");
  c_gc->add_option("--model", gc.model, "Bundle directory")->required();
  c_gc->add_option("--image", gc.image, "PNG or PGM image")->required();
  c_gc->add_option("--out", gc.out, "Output directory")->required();
  c_gc->add_option("--layer", layer, "Convolution gene id (default: deepest before the first dense layer)");
  c_gc->add_option("--class", gc.class_index, "Target class");
  c_gc->add_option("--config", gc.config, "Run configuration (pipeline section)");
  c_gc->add_flag("--raw", gc.raw, "Resize only; skip mean shift and masking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (verbose) set_log_level(LogLevel::debug);
  if (layer) gc.layer = static_cast<GeneId>(*layer);

  try {
    if (*c_pre) return cmd_preprocess(pre);
    if (*c_syn) return cmd_synth(syn);
    if (*c_evo) return cmd_evolve(evo);
    if (*c_trn) return cmd_train(trn);
    if (*c_ev) return cmd_eval(ev);
    if (*c_gc) return cmd_gradcam(gc);
  } catch (const UsageError& e) {
    std::cerr << "dndx: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "dndx: " << e.what() << "\n";
    return 2;
  } catch (const EvaluationError& e) {
    std::cerr << "dndx: " << e.what() << "\noffending genome:\n" << e.genome_descriptor();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dndx: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
