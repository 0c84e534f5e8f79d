#include "dndx/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace dndx {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'D', 'X'};
constexpr std::uint16_t kVersion = 1;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void write_weights(const Network& net, std::ostream& out) {
  out.write(kMagic, 4);
  io::put_u16(out, kVersion);
  for (const auto& layer : net.layers()) {
    if (!layer.state) continue;
    io::put_u32(out, layer.id);
    io::put_u64(out, layer.state->param_count());
    io::put_f32s(out, layer.state->weights.values());
    io::put_f32s(out, layer.state->bias.values());
  }
  if (!out) throw CheckpointError("failed writing weight checkpoint");
}

void read_weights(Network& net, std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError("not a weight checkpoint");
  const auto version = io::get_u16(in);
  if (!in || version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  for (auto& layer : net.layers()) {
    if (!layer.state) continue;
    const auto id = io::get_u32(in);
    const auto count = io::get_u64(in);
    if (!in) throw CheckpointError("checkpoint truncated before gene " + std::to_string(layer.id));
    if (id != layer.id) throw CheckpointError("checkpoint has gene " + std::to_string(id) + ", network expects " + std::to_string(layer.id));
    if (count != layer.state->param_count())
      throw CheckpointError("gene " + std::to_string(id) + ": checkpoint holds " + std::to_string(count) +
                            " parameters, network has " + std::to_string(layer.state->param_count()));
    io::get_f32s(in, layer.state->weights.values());
    io::get_f32s(in, layer.state->bias.values());
    if (!in) throw CheckpointError("checkpoint truncated in gene " + std::to_string(id));
    layer.state->weight_velocity.fill(0.0f);
    layer.state->bias_velocity.fill(0.0f);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint has trailing data");
}

void save_weights(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  write_weights(net, out);
}

void load_weights(Network& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  read_weights(net, in);
}

void export_bundle(const std::string& dir, const Network& net, const NormalizationStats& stats) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_genome(net.genome(), (fs::path(dir) / "genome.json").string());
  save_weights(net, (fs::path(dir) / "weights.dndx").string());

  nlohmann::ordered_json manifest;
  manifest["genome"] = "genome.json";
  manifest["weights"] = "weights.dndx";
  const Shape in = net.input_shape();
  manifest["input"] = {{"height", in.height}, {"width", in.width}, {"channels", in.channels}};
  manifest["classes"] = net.classes();
  manifest["normalization"] = {{"mean", stats.mean}, {"stddev", stats.stddev}};
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!out) throw CheckpointError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

ModelBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(fs::path(dir) / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(dir + "/manifest.json: " + e.what());
  }
  try {
    const Genome g = load_genome((fs::path(dir) / manifest.at("genome").get<std::string>()).string());
    Rng rng(0);
    ModelBundle bundle{compile(g, rng), {}};
    load_weights(bundle.network, (fs::path(dir) / manifest.at("weights").get<std::string>()).string());
    const auto& in = manifest.at("input");
    const Shape declared{in.at("height").get<int>(), in.at("width").get<int>(), in.at("channels").get<int>()};
    if (declared != bundle.network.input_shape()) throw CheckpointError("manifest input shape disagrees with genome");
    if (manifest.contains("normalization")) {
      bundle.stats.mean = manifest["normalization"].at("mean").get<double>();
      bundle.stats.stddev = manifest["normalization"].at("stddev").get<double>();
    }
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(dir + "/manifest.json: " + e.what());
  }
}

}  // namespace dndx
