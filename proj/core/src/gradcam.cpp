#include "dndx/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "dndx/imgpipe.hpp"

namespace dndx {

namespace {

constexpr float kOverlayAlpha = 0.4f;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

float Heatmap::max() const {
  float m = 0.0f;
  for (float v : values) m = std::max(m, v);
  return m;
}

GeneId default_gradcam_layer(const Network& net) {
  const auto& layers = net.layers();
  std::size_t first_fc = layers.size();
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (std::holds_alternative<layer::FullyConnected>(layers[i].kind)) {
      first_fc = i;
      break;
    }
  if (first_fc == layers.size()) throw LayerNotConvolutional("network has no fully connected layer");

  std::vector<bool> upstream(layers.size(), false);
  upstream[first_fc] = true;
  for (std::size_t i = first_fc + 1; i-- > 0;) {
    if (!upstream[i]) continue;
    if (i != first_fc && std::holds_alternative<layer::Conv>(layers[i].kind)) return layers[i].id;
    for (std::size_t src : layers[i].inputs) upstream[src] = true;
  }
  throw LayerNotConvolutional("no convolution feeds the first fully connected layer");
}

Heatmap gradcam_raw(const Network& net, const Tensor& image, std::optional<GeneId> layer, int class_index) {
  if (class_index < 0 || class_index >= net.classes()) throw std::out_of_range("gradcam class index out of range");
  if (image.dims().n != 1) throw ShapeMismatch("gradcam expects a single image");
  const GeneId target = layer ? *layer : default_gradcam_layer(net);
  const std::size_t index = net.index_of(target);
  if (!std::holds_alternative<layer::Conv>(net.layers()[index].kind))
    throw LayerNotConvolutional("gene " + std::to_string(target) + " is not a convolution");

  const ForwardTrace trace = net.forward(image);
  Tensor dlogits(net.logits(trace).dims(), 0.0f);
  dlogits[static_cast<std::size_t>(class_index)] = 1.0f;
  const BackwardResult back = net.backward(trace, dlogits);

  const Tensor& act = trace.outputs[index];
  const Tensor& grad = back.output_grads[index];
  const Dims d = act.dims();
  Heatmap map{d.w, d.h, std::vector<float>(static_cast<std::size_t>(d.h) * d.w, 0.0f)};
  if (grad.size() == 0) return map;

  const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
  std::vector<double> sum(plane, 0.0);
  for (int c = 0; c < d.c; ++c) {
    const float* a = act.data() + c * plane;
    const float* g = grad.data() + c * plane;
    double weight = 0.0;
    for (std::size_t k = 0; k < plane; ++k) weight += g[k];
    weight /= static_cast<double>(plane);
    if (weight == 0.0) continue;
    for (std::size_t k = 0; k < plane; ++k) sum[k] += weight * a[k];
  }
  for (std::size_t k = 0; k < plane; ++k) map.values[k] = static_cast<float>(std::max(0.0, sum[k]));
  return map;
}

Heatmap gradcam(const Network& net, const Tensor& image, std::optional<GeneId> layer, int class_index) {
  Heatmap map = gradcam_raw(net, image, layer, class_index);
  const float m = map.max();
  if (m > 0.0f)
    for (auto& v : map.values) v /= m;
  return map;
}

Heatmap upsample(const Heatmap& map, int width, int height) {
  GrayImage src(map.width, map.height);
  src.pixels = map.values;
  const GrayImage big = resize(src, width, height);
  return {width, height, big.pixels};
}

void heat_color(float v, std::uint8_t rgb[3]) {
  const double x = std::clamp(static_cast<double>(v), 0.0, 1.0);
  rgb[0] = to_byte(255.0 * std::clamp(3.0 * x, 0.0, 1.0));
  rgb[1] = to_byte(255.0 * std::clamp(3.0 * x - 1.0, 0.0, 1.0));
  rgb[2] = to_byte(255.0 * std::clamp(3.0 * x - 2.0, 0.0, 1.0));
}

RgbImage overlay(const Heatmap& map, const GrayImage& gray) {
  const Heatmap up = upsample(map, gray.width, gray.height);
  RgbImage out{gray.width, gray.height, std::vector<std::uint8_t>(gray.pixels.size() * 3)};
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const double g = std::clamp(static_cast<double>(gray.pixels[i]), 0.0, 255.0);
    const float v = std::clamp(up.values[i], 0.0f, 1.0f);
    std::uint8_t color[3];
    heat_color(v, color);
    const double alpha = kOverlayAlpha * v;
    for (int ch = 0; ch < 3; ++ch) out.rgb[3 * i + ch] = to_byte((1.0 - alpha) * g + alpha * color[ch]);
  }
  return out;
}

GrayImage heatmap_image(const Heatmap& map) {
  GrayImage img(map.width, map.height);
  for (std::size_t i = 0; i < map.values.size(); ++i)
    img.pixels[i] = static_cast<float>(to_byte(255.0 * std::clamp(map.values[i], 0.0f, 1.0f)));
  return img;
}

}  // namespace dndx
