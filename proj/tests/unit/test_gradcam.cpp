#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dndx/gradcam.hpp"
#include "oracles.hpp"

using namespace dndx;

namespace {

// Input(h, w, 1) -> Conv(4, k3, p) -> ReLU -> FC(2) -> Softmax
Genome conv_net(int size, int padding) {
  Genome g;
  g.genes = {{0, layer::Input{size, size, 1}},
             {1, layer::Conv{4, 3, 1, padding}},
             {2, layer::Relu{}},
             {3, layer::FullyConnected{2}},
             {4, layer::SoftmaxOutput{2}}};
  g.connections = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  return g;
}

Tensor image_tensor(int size, std::uint64_t seed) {
  Rng rng(seed);
  return oracle::dyadic({1, 1, size, size}, rng);
}

std::uint8_t byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

TEST_CASE("zero head weights give an all-zero map") {
  Rng rng(1);
  Network net = compile(conv_net(10, 1), rng);
  auto& head = net.layers()[net.head_index()].state;
  head->weights.fill(0.0f);
  head->bias.fill(0.0f);
  const Heatmap m = gradcam(net, image_tensor(10, 2), std::nullopt, 1);
  CHECK(m.width == 10);
  CHECK(m.height == 10);
  for (float v : m.values) CHECK(v == 0.0f);
}

TEST_CASE("uniform input gives a uniform interior map") {
  Rng rng(3);
  const Network net = compile(conv_net(12, 1), rng);
  const Tensor flat({1, 1, 12, 12}, 0.75f);
  for (int cls : {0, 1}) {
    const Heatmap m = gradcam_raw(net, flat, std::nullopt, cls);
    const float ref = m.at(1, 1);
    for (int y = 1; y < 11; ++y)
      for (int x = 1; x < 11; ++x) CHECK(m.at(x, y) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("scaling the head scales the raw map only") {
  Rng rng(4);
  Network net = compile(conv_net(9, 0), rng);
  const Tensor img = image_tensor(9, 5);
  const Heatmap raw = gradcam_raw(net, img, 1, 0);
  const Heatmap norm = gradcam(net, img, 1, 0);
  REQUIRE(raw.max() > 0.0f);
  CHECK(norm.max() == doctest::Approx(1.0f));

  auto& head = net.layers()[net.head_index()].state;
  for (auto& w : head->weights.values()) w *= 2.0f;
  for (auto& b : head->bias.values()) b *= 2.0f;
  const Heatmap raw2 = gradcam_raw(net, img, 1, 0);
  for (std::size_t i = 0; i < raw.values.size(); ++i) CHECK(raw2.values[i] == 2.0f * raw.values[i]);
  CHECK(gradcam(net, img, 1, 0) == norm);
}

TEST_CASE("layer selection") {
  Rng rng(6);
  const Network net = compile(conv_net(8, 1), rng);
  CHECK(default_gradcam_layer(net) == 1);
  CHECK_THROWS_AS(gradcam(net, image_tensor(8, 1), 3, 0), LayerNotConvolutional);
  CHECK_THROWS(gradcam(net, image_tensor(8, 1), std::nullopt, 2));

  Rng r2(1);
  const Network no_conv = compile(minimal_genome({8, 8, 1}, 2), r2);
  CHECK_THROWS_AS(default_gradcam_layer(no_conv), LayerNotConvolutional);
}

TEST_CASE("maps are non-negative and at most one") {
  Rng rng(7);
  const Network net = compile(conv_net(10, 1), rng);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Heatmap m = gradcam(net, image_tensor(10, s), std::nullopt, static_cast<int>(s % 2));
    for (float v : m.values) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("heat ramp") {
  std::uint8_t c[3];
  heat_color(0.0f, c);
  CHECK((c[0] == 0 && c[1] == 0 && c[2] == 0));
  heat_color(1.0f, c);
  CHECK((c[0] == 255 && c[1] == 255 && c[2] == 255));
  heat_color(1.0f / 3.0f, c);
  CHECK(c[0] == 255);
  CHECK(c[2] == 0);
}

TEST_CASE("overlay") {
  GrayImage gray(6, 5);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) gray.pixels[i] = static_cast<float>(i * 8);

  const Heatmap zero{6, 5, std::vector<float>(30, 0.0f)};
  const RgbImage plain = overlay(zero, gray);
  CHECK(plain.width == 6);
  CHECK(plain.height == 5);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    for (int ch = 0; ch < 3; ++ch) CHECK(plain.rgb[3 * i + ch] == byte(gray.pixels[i]));

  Heatmap map{6, 5, std::vector<float>(30)};
  for (std::size_t i = 0; i < 30; ++i) map.values[i] = static_cast<float>(i) / 29.0f;
  const RgbImage blended = overlay(map, gray);
  for (std::size_t i = 0; i < 30; ++i) {
    const double v = map.values[i];
    const double ramp[3] = {std::clamp(3 * v, 0.0, 1.0), std::clamp(3 * v - 1, 0.0, 1.0), std::clamp(3 * v - 2, 0.0, 1.0)};
    const double a = 0.4 * v;
    for (int ch = 0; ch < 3; ++ch) {
      const double expected = (1 - a) * gray.pixels[i] + a * byte(255.0 * ramp[ch]);
      CHECK(std::abs(int(blended.rgb[3 * i + ch]) - int(byte(expected))) <= 1);
    }
  }

  const RgbImage big = overlay(Heatmap{3, 2, std::vector<float>(6, 0.5f)}, GrayImage(30, 20, 100.0f));
  CHECK(big.width == 30);
  CHECK(big.rgb.size() == 30 * 20 * 3);
}

TEST_CASE("upsampling and export") {
  const Heatmap m{2, 1, {0.0f, 1.0f}};
  const Heatmap up = upsample(m, 5, 3);
  CHECK(up.at(0, 0) == 0.0f);
  CHECK(up.at(4, 2) == 1.0f);
  CHECK(up.at(2, 1) == doctest::Approx(0.5f));
  const GrayImage img = heatmap_image(m);
  CHECK(img.pixels == std::vector<float>{0.0f, 255.0f});
}
