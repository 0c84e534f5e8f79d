#pragma once

// Gradient-weighted class activation maps and their colour overlays.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dndx/genome.hpp"
#include "dndx/image.hpp"
#include "dndx/network.hpp"
#include "dndx/tensor.hpp"

namespace dndx {

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  ///< row-major, >= 0

  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float max() const;
  bool operator==(const Heatmap&) const = default;
};

class LayerNotConvolutional : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The deepest convolution upstream of the first fully connected layer.
GeneId default_gradcam_layer(const Network& net);

/// Rectified gradient-weighted channel sum at `layer` for the raw logit of
/// `class_index`, before max-normalization. `image` is one (1, c, h, w) item.
Heatmap gradcam_raw(const Network& net, const Tensor& image, std::optional<GeneId> layer, int class_index);

/// gradcam_raw scaled so the maximum is 1 (all-zero maps stay zero).
Heatmap gradcam(const Network& net, const Tensor& image, std::optional<GeneId> layer, int class_index);

/// Bilinear (corner-aligned) upsampling to width x height.
Heatmap upsample(const Heatmap& map, int width, int height);

/// "hot" ramp: black -> red -> yellow -> white over v in [0, 1].
void heat_color(float v, std::uint8_t rgb[3]);

/// Heatmap upsampled to the image, coloured with heat_color and blended per
/// pixel with weight 0.4 * v over the grayscale image (intensities clamped to
/// [0, 255]). A zero heatmap reproduces the grayscale image in all channels.
RgbImage overlay(const Heatmap& map, const GrayImage& gray);

/// Normalized map scaled to 0..255.
GrayImage heatmap_image(const Heatmap& map);

}  // namespace dndx
