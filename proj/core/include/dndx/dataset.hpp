#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dndx {

/// Dataset-global standardization constants, kept for inference-time reuse.
struct NormalizationStats {
  double mean = 0.0;
  double stddev = 1.0;
  bool operator==(const NormalizationStats&) const = default;
};

/// Single-channel labelled images stored back to back.
struct Dataset {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<const float> image(std::size_t i) const { return {pixels.data() + i * image_size(), image_size()}; }
  void push_back(std::span<const float> img, std::uint8_t label);
  bool operator==(const Dataset&) const = default;
};

struct DatasetSplit {
  Dataset train;
  Dataset dev;
  Dataset test;
  NormalizationStats stats;
  bool operator==(const DatasetSplit&) const = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 80/10/10 by count: dev and test get floor(n / 10) each, train the rest.
struct SplitCounts {
  std::size_t train;
  std::size_t dev;
  std::size_t test;
};
SplitCounts split_counts(std::size_t n);

/// Binary dataset file. Items are stored train, dev, test in that order so the
/// partition is recoverable from the count. Version 1 is the 256x256 layout;
/// version 2 adds explicit u32 height and width after the count for any other
/// size.
void write_dataset(const std::string& path, const DatasetSplit& split);
DatasetSplit read_dataset(const std::string& path);

/// "mean <value>\nstddev <value>\n", written next to the dataset file.
void write_stats(const std::string& path, const NormalizationStats& stats);
NormalizationStats read_stats(const std::string& path);

}  // namespace dndx
