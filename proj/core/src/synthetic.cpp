#include "dndx/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "dndx/imgpipe.hpp"
#include "dndx/rng.hpp"

namespace dndx {

void SyntheticConfig::validate() const {
  if (count < 10) throw std::invalid_argument("synthetic count must be >= 10");
  if (size < 2 || size % 2 != 0) throw std::invalid_argument("synthetic size must be even and >= 2");
  if (square < 1 || square > size / 2) throw std::invalid_argument("synthetic square must fit in a quadrant");
  if (!(noise_stddev >= 0.0f && offset_stddev >= 0.0f)) throw std::invalid_argument("synthetic noise must be >= 0");
}

std::vector<SyntheticImage> synthesize(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 1));
  const int half = cfg.size / 2;
  std::vector<SyntheticImage> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    SyntheticImage item;
    item.label = static_cast<std::uint8_t>(i % 2);
    item.image = GrayImage(cfg.size, cfg.size);
    const double offset = rng.normal(0.0, cfg.offset_stddev);
    for (auto& p : item.image.pixels) p = static_cast<float>(cfg.background + offset + rng.normal(0.0, cfg.noise_stddev));
    if (item.label == 1) {
      item.quadrant = static_cast<int>(rng.uniform_index(4));
      const int span = half - cfg.square + 1;
      item.square_x = (item.quadrant % 2) * half + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(span)));
      item.square_y = (item.quadrant / 2) * half + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(span)));
      for (int y = item.square_y; y < item.square_y + cfg.square; ++y)
        for (int x = item.square_x; x < item.square_x + cfg.square; ++x) item.image.at(x, y) += cfg.square_gain;
    }
    for (auto& p : item.image.pixels) p = std::clamp(p, 0.0f, 255.0f);
    out.push_back(std::move(item));
  }
  return out;
}

DatasetSplit synthetic_dataset(const SyntheticConfig& cfg, std::vector<SyntheticImage>* meta) {
  std::vector<SyntheticImage> items = synthesize(cfg);
  std::vector<GrayImage> images;
  images.reserve(items.size());
  for (const auto& it : items) images.push_back(it.image);
  const NormalizationStats stats = standardize(images);

  // Reproduce split()'s permutation so metadata lines up with the items.
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(cfg.seed);
  rng.shuffle(order.begin(), order.end());
  if (meta) {
    meta->clear();
    for (std::size_t k : order) meta->push_back(items[k]);
  }

  std::vector<LabeledImage> labeled;
  labeled.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) labeled.push_back({std::move(images[i]), items[i].label});
  return split(std::move(labeled), cfg.seed, stats);
}

}  // namespace dndx
