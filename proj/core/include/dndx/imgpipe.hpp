#pragma once

// Radiograph preprocessing: resize, mean shift, mid-intensity band filter,
// contour fill mask, masking, dataset-wide standardization and the
// 80/10/10 split.

#include <cstdint>
#include <string>
#include <vector>

#include "dndx/dataset.hpp"
#include "dndx/image.hpp"

namespace dndx {

struct PipelineConfig {
  int target_width = 256;
  int target_height = 256;
  float target_mean = 128.0f;
  float band_low = 64.0f;
  float band_high = 192.0f;
  /// Components smaller than this fraction of the image area are discarded.
  double min_area_fraction = 0.01;

  bool operator==(const PipelineConfig&) const = default;
  void validate() const;
};

/// Bilinear resampling with corner alignment (output corners sample the
/// input corners exactly).
GrayImage resize(const GrayImage& img, int width, int height);

/// Adds (target - mean) to every pixel, clamped to [0, 255].
GrayImage mean_shift(const GrayImage& img, float target_mean);

/// Bit set iff low <= pixel <= high.
BinaryMask band_filter(const GrayImage& img, float low, float high);

struct ContourFill {
  BinaryMask mask;
  /// No component survived; the mask is all ones (no segmentation).
  bool empty_fallback = false;
};

/// 8-connected components of the set bits; components below the minimum
/// area are dropped and interior holes of the survivors are filled.
ContourFill contour_fill(const BinaryMask& mask, double min_area_fraction = 0.01);

/// Pixels outside the mask become 0.
GrayImage apply_mask(const GrayImage& img, const BinaryMask& mask);

/// resize -> mean_shift -> band_filter -> contour_fill -> apply_mask
GrayImage preprocess_image(const GrayImage& img, const PipelineConfig& cfg);

class ZeroVarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Global mean / population stddev over every pixel of every image, then
/// x -> (x - mean) / stddev in place.
NormalizationStats standardize(std::vector<GrayImage>& images);

struct LabeledImage {
  GrayImage image;
  std::uint8_t label = 0;
};

/// Deterministic shuffle under `seed`, then train / dev / test by
/// split_counts(). All images must share one size.
DatasetSplit split(std::vector<LabeledImage> items, std::uint64_t seed, NormalizationStats stats = {});

/// Per-image preprocessing, dataset standardization, then split.
DatasetSplit build_dataset(std::vector<LabeledImage> raw, const PipelineConfig& cfg, std::uint64_t seed);

struct ManifestEntry {
  std::string filename;
  std::uint8_t label = 0;
};

/// CSV with header "filename,label"; labels must be 0 or 1.
std::vector<ManifestEntry> read_manifest(const std::string& path);

/// Fingerprint of a split's labels, pixel bits and stats.
std::uint64_t dataset_hash(const DatasetSplit& split);

}  // namespace dndx
