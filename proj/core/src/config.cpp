#include "dndx/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace dndx {

namespace {

using ojson = nlohmann::ordered_json;

void expect_keys(const ojson& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown field '" + key + "' in " + where);
  }
}

template <class T>
void read(const ojson& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const ojson& v = obj[key];
  if constexpr (std::is_same_v<T, double> || std::is_same_v<T, float>) {
    if (!v.is_number()) throw ConfigError(where + "." + key + " must be a number");
  } else {
    if (!v.is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
    if (std::is_unsigned_v<T> && v.get<long long>() < 0 && !v.is_number_unsigned())
      throw ConfigError(where + "." + key + " must be >= 0");
  }
  out = v.get<T>();
}

std::vector<int> int_list(const ojson& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + " must be an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw ConfigError(where + " must be an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

ojson init_json(const InitScheme& s) {
  if (const auto* g = std::get_if<init::Gaussian>(&s)) return ojson{{"scheme", "gaussian"}, {"stddev", g->stddev}};
  if (std::holds_alternative<init::UniformFanIn>(s)) return ojson{{"scheme", "uniform_fan_in"}};
  return ojson{{"scheme", "gaussian_fan_avg"}};
}

InitScheme parse_init(const ojson& v, const std::string& where) {
  if (!v.is_object() || !v.contains("scheme") || !v["scheme"].is_string())
    throw ConfigError(where + " entries need a string 'scheme'");
  const auto scheme = v["scheme"].get<std::string>();
  if (scheme == "gaussian") {
    expect_keys(v, {"scheme", "stddev"}, where);
    if (!v.contains("stddev") || !v["stddev"].is_number()) throw ConfigError(where + " gaussian needs 'stddev'");
    return init::Gaussian{v["stddev"].get<double>()};
  }
  expect_keys(v, {"scheme"}, where);
  if (scheme == "uniform_fan_in") return init::UniformFanIn{};
  if (scheme == "gaussian_fan_avg") return init::GaussianFanAvg{};
  throw ConfigError("unknown init scheme '" + scheme + "' in " + where);
}

}  // namespace

void RunConfig::validate() const {
  try {
    EvolutionConfig e = evolution;
    e.seed = seed;
    e.validate();
    solver.validate();
    pipeline.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }
}

RunConfig parse_config(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(doc, {"seed", "evolution", "solver", "mutation_rates", "ranges", "pipeline"}, "config");

  RunConfig cfg;
  read(doc, "seed", cfg.seed, "config");

  if (doc.contains("evolution")) {
    const ojson& e = doc["evolution"];
    expect_keys(e, {"population_size", "max_generations", "target_fitness", "cull_fraction", "staleness_limit",
                    "compatibility_threshold", "length_coefficient", "edit_coefficient"},
                "evolution");
    auto& ev = cfg.evolution;
    read(e, "population_size", ev.population_size, "evolution");
    read(e, "max_generations", ev.max_generations, "evolution");
    read(e, "target_fitness", ev.target_fitness, "evolution");
    read(e, "cull_fraction", ev.cull_fraction, "evolution");
    read(e, "staleness_limit", ev.staleness_limit, "evolution");
    read(e, "compatibility_threshold", ev.compatibility_threshold, "evolution");
    read(e, "length_coefficient", ev.length_coefficient, "evolution");
    read(e, "edit_coefficient", ev.edit_coefficient, "evolution");
  }

  if (doc.contains("solver")) {
    const ojson& s = doc["solver"];
    expect_keys(s, {"base_lr", "lr_policy", "gamma", "power", "momentum", "weight_decay", "epochs", "batch_size"},
                "solver");
    auto& sv = cfg.solver;
    read(s, "base_lr", sv.base_lr, "solver");
    if (s.contains("lr_policy") && s["lr_policy"] != "inv") throw ConfigError("solver.lr_policy must be \"inv\"");
    read(s, "gamma", sv.gamma, "solver");
    read(s, "power", sv.power, "solver");
    read(s, "momentum", sv.momentum, "solver");
    read(s, "weight_decay", sv.weight_decay, "solver");
    read(s, "epochs", sv.epochs, "solver");
    read(s, "batch_size", sv.batch_size, "solver");
  }

  if (doc.contains("mutation_rates")) {
    const ojson& m = doc["mutation_rates"];
    expect_keys(m, {"inject_convolution", "inject_pooling", "add_relu", "point_mutate", "inject_segment"},
                "mutation_rates");
    auto& r = cfg.evolution.rates;
    read(m, "inject_convolution", r.inject_convolution, "mutation_rates");
    read(m, "inject_pooling", r.inject_pooling, "mutation_rates");
    read(m, "add_relu", r.add_relu, "mutation_rates");
    read(m, "point_mutate", r.point_mutate, "mutation_rates");
    read(m, "inject_segment", r.inject_segment, "mutation_rates");
  }

  if (doc.contains("ranges")) {
    const ojson& r = doc["ranges"];
    expect_keys(r, {"conv_kernel", "conv_stride", "conv_padding", "conv_filters", "pool_kernel", "pool_stride",
                    "pool_mode", "fc_units", "init"},
                "ranges");
    auto& hr = cfg.evolution.ranges;
    if (r.contains("conv_kernel")) hr.conv_kernel = int_list(r["conv_kernel"], "ranges.conv_kernel");
    if (r.contains("conv_stride")) hr.conv_stride = int_list(r["conv_stride"], "ranges.conv_stride");
    if (r.contains("conv_padding")) hr.conv_padding = int_list(r["conv_padding"], "ranges.conv_padding");
    if (r.contains("conv_filters")) hr.conv_filters = int_list(r["conv_filters"], "ranges.conv_filters");
    if (r.contains("pool_kernel")) hr.pool_kernel = int_list(r["pool_kernel"], "ranges.pool_kernel");
    if (r.contains("pool_stride")) hr.pool_stride = int_list(r["pool_stride"], "ranges.pool_stride");
    if (r.contains("fc_units")) hr.fc_units = int_list(r["fc_units"], "ranges.fc_units");
    if (r.contains("pool_mode")) {
      if (!r["pool_mode"].is_array()) throw ConfigError("ranges.pool_mode must be an array");
      hr.pool_mode.clear();
      for (const auto& m : r["pool_mode"]) {
        if (m == "max") hr.pool_mode.push_back(PoolMode::max);
        else if (m == "average") hr.pool_mode.push_back(PoolMode::average);
        else throw ConfigError("ranges.pool_mode entries must be \"max\" or \"average\"");
      }
    }
    if (r.contains("init")) {
      if (!r["init"].is_array()) throw ConfigError("ranges.init must be an array");
      hr.init.clear();
      for (const auto& i : r["init"]) hr.init.push_back(parse_init(i, "ranges.init"));
    }
  }

  if (doc.contains("pipeline")) {
    const ojson& p = doc["pipeline"];
    expect_keys(p, {"target_width", "target_height", "target_mean", "band_low", "band_high", "min_area_fraction"},
                "pipeline");
    auto& pc = cfg.pipeline;
    read(p, "target_width", pc.target_width, "pipeline");
    read(p, "target_height", pc.target_height, "pipeline");
    read(p, "target_mean", pc.target_mean, "pipeline");
    read(p, "band_low", pc.band_low, "pipeline");
    read(p, "band_high", pc.band_high, "pipeline");
    read(p, "min_area_fraction", pc.min_area_fraction, "pipeline");
  }

  cfg.evolution.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const RunConfig& cfg) {
  const auto& ev = cfg.evolution;
  const auto& sv = cfg.solver;
  const auto& r = ev.rates;
  const auto& hr = ev.ranges;
  const auto& pc = cfg.pipeline;
  ojson modes = ojson::array();
  for (auto m : hr.pool_mode) modes.push_back(m == PoolMode::max ? "max" : "average");
  ojson inits = ojson::array();
  for (const auto& i : hr.init) inits.push_back(init_json(i));

  ojson doc;
  doc["seed"] = cfg.seed;
  doc["evolution"] = {{"population_size", ev.population_size},
                      {"max_generations", ev.max_generations},
                      {"target_fitness", ev.target_fitness},
                      {"cull_fraction", ev.cull_fraction},
                      {"staleness_limit", ev.staleness_limit},
                      {"compatibility_threshold", ev.compatibility_threshold},
                      {"length_coefficient", ev.length_coefficient},
                      {"edit_coefficient", ev.edit_coefficient}};
  doc["solver"] = {{"base_lr", sv.base_lr},     {"lr_policy", "inv"},
                   {"gamma", sv.gamma},         {"power", sv.power},
                   {"momentum", sv.momentum},   {"weight_decay", sv.weight_decay},
                   {"epochs", sv.epochs},       {"batch_size", sv.batch_size}};
  doc["mutation_rates"] = {{"inject_convolution", r.inject_convolution},
                           {"inject_pooling", r.inject_pooling},
                           {"add_relu", r.add_relu},
                           {"point_mutate", r.point_mutate},
                           {"inject_segment", r.inject_segment}};
  doc["ranges"] = {{"conv_kernel", hr.conv_kernel},   {"conv_stride", hr.conv_stride},
                   {"conv_padding", hr.conv_padding}, {"conv_filters", hr.conv_filters},
                   {"pool_kernel", hr.pool_kernel},   {"pool_stride", hr.pool_stride},
                   {"pool_mode", modes},              {"fc_units", hr.fc_units},
                   {"init", inits}};
  doc["pipeline"] = {{"target_width", pc.target_width}, {"target_height", pc.target_height},
                     {"target_mean", pc.target_mean},   {"band_low", pc.band_low},
                     {"band_high", pc.band_high},       {"min_area_fraction", pc.min_area_fraction}};
  return doc.dump(2) + "\n";
}

void apply_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("DNDX_SEED");
  if (!env || !*env) return;
  const std::string text = env;
  try {
    std::size_t used = 0;
    if (text.front() == '-') throw std::invalid_argument(text);
    const auto v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    cfg.seed = v;
    cfg.evolution.seed = v;
  } catch (const std::exception&) {
    throw ConfigError("DNDX_SEED must be a non-negative integer, got '" + text + "'");
  }
}

}  // namespace dndx
