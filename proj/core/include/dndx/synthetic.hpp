#pragma once

// Planted-square detection task used for desk-scale searches.

#include <cstdint>

#include "dndx/dataset.hpp"
#include "dndx/image.hpp"

namespace dndx {

struct SyntheticConfig {
  int count = 1200;
  int size = 32;
  int square = 8;
  float background = 100.0f;
  /// Per-pixel Gaussian noise.
  float noise_stddev = 20.0f;
  /// Per-image Gaussian brightness offset shared by all pixels.
  float offset_stddev = 50.0f;
  /// Added inside the square.
  float square_gain = 100.0f;
  std::uint64_t seed = 20240101;

  void validate() const;
};

struct SyntheticImage {
  GrayImage image;  ///< raw intensities in [0, 255]
  std::uint8_t label = 0;
  /// Top-left corner of the square; -1 for negatives.
  int square_x = -1;
  int square_y = -1;
  /// 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right; -1 for negatives.
  int quadrant = -1;
};

/// Balanced classes alternating by index. A positive's square lies entirely
/// inside one uniformly chosen quadrant.
std::vector<SyntheticImage> synthesize(const SyntheticConfig& cfg);

/// synthesize -> standardize -> split (shuffled with cfg.seed). Alongside the
/// split, `meta` receives each split item's source record in split order
/// (train, dev, test) when non-null.
DatasetSplit synthetic_dataset(const SyntheticConfig& cfg, std::vector<SyntheticImage>* meta = nullptr);

}  // namespace dndx
