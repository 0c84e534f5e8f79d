#pragma once

// Weight checkpoints and model bundles.
//
// Checkpoint layout (little-endian): "DNDX", u16 version, then for every
// parameterized layer in topological order: u32 gene id, u64 parameter
// count, the weights followed by the bias as raw 32-bit floats.

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "dndx/dataset.hpp"
#include "dndx/network.hpp"

namespace dndx {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_weights(const Network& net, std::ostream& out);
/// Overwrites the parameters of a network compiled from the same genome.
void read_weights(Network& net, std::istream& in);

void save_weights(const Network& net, const std::string& path);
void load_weights(Network& net, const std::string& path);

/// A directory holding genome.json, weights.dndx and manifest.json.
struct ModelBundle {
  Network network;
  NormalizationStats stats;
};

void export_bundle(const std::string& dir, const Network& net, const NormalizationStats& stats);
ModelBundle load_bundle(const std::string& dir);

}  // namespace dndx
