#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "dndx/imgpipe.hpp"
#include "dndx/synthetic.hpp"
#include "oracles.hpp"

using namespace dndx;

namespace {

GrayImage noise(int w, int h, std::uint64_t seed, float lo, float hi) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

double mean_of(const GrayImage& img) {
  return std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.pixels.size());
}

void fill_rect(BinaryMask& m, int x0, int y0, int w, int h) {
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) m.set(x, y, true);
}

std::vector<LabeledImage> items(int n, int size = 4) {
  std::vector<LabeledImage> out;
  for (int i = 0; i < n; ++i) out.push_back({GrayImage(size, size, static_cast<float>(i)), static_cast<std::uint8_t>(i % 2)});
  return out;
}

}  // namespace

TEST_CASE("resize") {
  const GrayImage img = noise(256, 256, 1, 0, 255);
  CHECK(resize(img, 256, 256) == img);

  const GrayImage flat = resize(GrayImage(512, 512, 77.0f), 256, 256);
  CHECK(flat.width == 256);
  for (float p : flat.pixels) CHECK(p == doctest::Approx(77.0f));

  // Ramp f(x, y) = 255 * (x + y) / (W - 1 + H - 1) is linear, so corner-aligned
  // bilinear sampling reproduces it exactly at every output pixel.
  const int W = 2000, H = 3000;
  GrayImage ramp(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) ramp.at(x, y) = 255.0f * static_cast<float>(x + y) / static_cast<float>(W - 1 + H - 1);
  const GrayImage small = resize(ramp, 256, 256);
  auto analytic = [&](int x, int y) {
    const double sx = x * (W - 1) / 255.0;
    const double sy = y * (H - 1) / 255.0;
    return 255.0 * (sx + sy) / (W - 1 + H - 1);
  };
  for (auto [x, y] : {std::pair{0, 0}, {255, 0}, {0, 255}, {255, 255}, {128, 64}})
    CHECK(std::fabs(small.at(x, y) - analytic(x, y)) <= 1.0);
}

TEST_CASE("mean shift") {
  GrayImage img(4, 4, 128.0f);
  CHECK(mean_shift(img, 128.0f) == img);
  const GrayImage zero = mean_shift(GrayImage(8, 8, 0.0f), 128.0f);
  for (float p : zero.pixels) CHECK(p == 128.0f);

  const GrayImage shifted = mean_shift(noise(64, 64, 2, 40, 120), 128.0f);
  const auto clamped = std::count_if(shifted.pixels.begin(), shifted.pixels.end(), [](float p) { return p == 0.0f || p == 255.0f; });
  REQUIRE(clamped < 41);
  CHECK(std::fabs(mean_of(shifted) - 128.0) <= 2.0);
}

TEST_CASE("band filter") {
  GrayImage img(3, 1);
  img.pixels = {0.0f, 128.0f, 255.0f};
  const BinaryMask m = band_filter(img, 64, 192);
  CHECK(m.bits == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(band_filter(img, 0, 255).popcount() == 3);

  const GrayImage n = noise(50, 40, 3, 0, 255);
  const auto brute = std::count_if(n.pixels.begin(), n.pixels.end(), [](float p) { return p >= 64 && p <= 192; });
  CHECK(band_filter(n, 64, 192).popcount() == static_cast<std::size_t>(brute));
}

TEST_CASE("contour fill") {
  SUBCASE("solid rectangle is unchanged") {
    BinaryMask m(40, 40);
    fill_rect(m, 5, 5, 20, 10);
    const ContourFill out = contour_fill(m);
    CHECK_FALSE(out.empty_fallback);
    CHECK(out.mask == m);
  }
  SUBCASE("interior hole is filled") {
    BinaryMask m(40, 40);
    fill_rect(m, 5, 5, 20, 20);
    BinaryMask holed = m;
    for (int y = 10; y < 15; ++y)
      for (int x = 10; x < 15; ++x) holed.set(x, y, false);
    CHECK(contour_fill(holed).mask == m);
  }
  SUBCASE("small components are dropped") {
    BinaryMask m(100, 100);
    fill_rect(m, 2, 2, 5, 10);     // 0.5% of the area
    fill_rect(m, 40, 40, 25, 20);  // 5%
    const auto sizes = oracle::component_sizes(m);
    REQUIRE(sizes.size() == 2);
    const ContourFill out = contour_fill(m, 0.01);
    CHECK(out.mask.popcount() == 500);
    CHECK_FALSE(out.mask.at(3, 3));
    CHECK(out.mask.at(50, 50));
  }
  SUBCASE("diagonal pixels are one component") {
    BinaryMask m(10, 10);
    for (int i = 0; i < 10; ++i) m.set(i, i, true);
    CHECK(oracle::component_sizes(m).size() == 1);
    CHECK(contour_fill(m, 0.1).mask.popcount() == 10);
  }
  SUBCASE("nothing survives") {
    BinaryMask m(50, 50);
    m.set(3, 3, true);
    const ContourFill out = contour_fill(m, 0.01);
    CHECK(out.empty_fallback);
    CHECK(out.mask.popcount() == 2500);
  }
}

TEST_CASE("masking and the full per-image pipeline") {
  GrayImage img(2, 2, 9.0f);
  BinaryMask m(2, 2);
  m.set(1, 0, true);
  const GrayImage out = apply_mask(img, m);
  CHECK(out.pixels == std::vector<float>{0, 9, 0, 0});
  CHECK_THROWS_AS(apply_mask(img, BinaryMask(3, 3)), ImageError);

  PipelineConfig cfg;
  const GrayImage p = preprocess_image(noise(300, 200, 4, 60, 200), cfg);
  CHECK(p.width == 256);
  CHECK(p.height == 256);
}

TEST_CASE("standardize") {
  std::vector<GrayImage> imgs{noise(8, 8, 5, 0, 255), noise(8, 8, 6, 0, 255), noise(8, 8, 7, 10, 50)};
  std::vector<GrayImage> reversed(imgs.rbegin(), imgs.rend());
  const NormalizationStats s = standardize(imgs);
  const NormalizationStats r = standardize(reversed);
  CHECK(s.mean == doctest::Approx(r.mean).epsilon(1e-12));
  CHECK(s.stddev == doctest::Approx(r.stddev).epsilon(1e-12));

  double sum = 0.0, ss = 0.0;
  std::size_t n = 0;
  for (const auto& img : imgs)
    for (float p : img.pixels) {
      sum += p;
      ss += static_cast<double>(p) * p;
      ++n;
    }
  const double mean = sum / n;
  CHECK(std::fabs(mean) < 1e-6);
  CHECK(std::fabs(std::sqrt(ss / n - mean * mean) - 1.0) < 1e-6);

  std::vector<GrayImage> flat{GrayImage(4, 4, 3.0f), GrayImage(4, 4, 3.0f)};
  CHECK_THROWS_AS(standardize(flat), ZeroVarianceError);
}

TEST_CASE("split") {
  const DatasetSplit ten = split(items(10), 1);
  CHECK(ten.train.size() == 8);
  CHECK(ten.dev.size() == 1);
  CHECK(ten.test.size() == 1);

  const DatasetSplit a = split(items(1000), 42);
  CHECK(a.train.size() == 800);
  CHECK(a.dev.size() == 100);
  CHECK(a.test.size() == 100);
  CHECK(split(items(1000), 42) == a);
  CHECK_FALSE(split(items(1000), 43) == a);

  // Disjoint and exhaustive: each item carries its index as pixel value.
  std::set<float> seen;
  for (const Dataset* d : {&a.train, &a.dev, &a.test})
    for (std::size_t i = 0; i < d->size(); ++i) seen.insert(d->image(i)[0]);
  CHECK(seen.size() == 1000);

  CHECK_THROWS_AS(split({}, 1), DatasetError);
  auto mixed = items(4);
  mixed[2].image = GrayImage(5, 5);
  CHECK_THROWS_AS(split(mixed, 1), DatasetError);
}

TEST_CASE("manifest parsing") {
  const auto dir = std::filesystem::temp_directory_path() / "dndx_manifest_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "manifest.csv").string();
  {
    std::ofstream out(path);
    out << "filename,label\r\na.png,0\nb,c.pgm,1\n\n";
  }
  const auto entries = read_manifest(path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[1].filename == "b,c.pgm");
  CHECK(entries[1].label == 1);
  {
    std::ofstream out(path);
    out << "filename,label\na.png,2\n";
  }
  CHECK_THROWS_AS(read_manifest(path), DatasetError);
  CHECK_THROWS_AS(read_manifest((dir / "absent.csv").string()), DatasetError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset hash is a function of the content") {
  const DatasetSplit a = split(items(20), 3);
  DatasetSplit b = a;
  CHECK(dataset_hash(a) == dataset_hash(b));
  b.train.pixels[0] += 1.0f;
  CHECK(dataset_hash(a) != dataset_hash(b));
}

TEST_CASE("synthetic task") {
  SyntheticConfig cfg;
  cfg.count = 40;
  cfg.size = 16;
  cfg.square = 4;
  const auto imgs = synthesize(cfg);
  REQUIRE(imgs.size() == 40);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    CHECK(imgs[i].label == i % 2);
    if (imgs[i].label == 0) {
      CHECK(imgs[i].quadrant == -1);
      continue;
    }
    const int half = cfg.size / 2;
    CHECK(imgs[i].square_x / half == imgs[i].quadrant % 2);
    CHECK((imgs[i].square_x + cfg.square - 1) / half == imgs[i].quadrant % 2);
    CHECK(imgs[i].square_y / half == imgs[i].quadrant / 2);
  }
  std::vector<SyntheticImage> meta;
  const DatasetSplit s = synthetic_dataset(cfg, &meta);
  REQUIRE(meta.size() == 40);
  for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(s.train.labels[i] == meta[i].label);
  CHECK(synthetic_dataset(cfg) == s);
}
