#include "dndx/imgpipe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dndx/hash.hpp"
#include "dndx/log.hpp"
#include "dndx/rng.hpp"

namespace dndx {

void PipelineConfig::validate() const {
  if (target_width < 1 || target_height < 1) throw std::invalid_argument("pipeline target size must be >= 1");
  if (!(band_low <= band_high)) throw std::invalid_argument("pipeline band_low must not exceed band_high");
  if (!(min_area_fraction >= 0.0 && min_area_fraction <= 1.0))
    throw std::invalid_argument("pipeline min_area_fraction must lie in [0, 1]");
  if (!(target_mean >= 0.0f && target_mean <= 255.0f)) throw std::invalid_argument("pipeline target_mean must lie in [0, 255]");
}

GrayImage resize(const GrayImage& img, int width, int height) {
  if (width == img.width && height == img.height) return img;
  GrayImage out(width, height);
  auto source = [](int dst, int dst_len, int src_len) {
    if (dst_len == 1) return 0.5 * (src_len - 1);
    return static_cast<double>(dst) * (src_len - 1) / (dst_len - 1);
  };
  for (int y = 0; y < height; ++y) {
    const double sy = source(y, height, img.height);
    const int y0 = std::min(static_cast<int>(sy), img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = source(x, width, img.width);
      const int x0 = std::min(static_cast<int>(sx), img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = sx - x0;
      const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
      const double bottom = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
      out.at(x, y) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
    }
  }
  return out;
}

GrayImage mean_shift(const GrayImage& img, float target_mean) {
  double sum = 0.0;
  for (float p : img.pixels) sum += p;
  const double shift = target_mean - sum / static_cast<double>(img.pixels.size());
  GrayImage out = img;
  for (auto& p : out.pixels) p = static_cast<float>(std::clamp(p + shift, 0.0, 255.0));
  return out;
}

BinaryMask band_filter(const GrayImage& img, float low, float high) {
  BinaryMask mask(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    mask.bits[i] = (img.pixels[i] >= low && img.pixels[i] <= high) ? 1 : 0;
  return mask;
}

ContourFill contour_fill(const BinaryMask& mask, double min_area_fraction) {
  const int w = mask.width;
  const int h = mask.height;
  const std::size_t area = static_cast<std::size_t>(w) * h;
  const double min_area = min_area_fraction * static_cast<double>(area);

  BinaryMask kept(w, h);
  std::vector<int> label(area, -1);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> component;
  int next_label = 0;
  bool any = false;
  for (std::size_t start = 0; start < area; ++start) {
    if (!mask.bits[start] || label[start] >= 0) continue;
    component.clear();
    stack.assign(1, start);
    label[start] = next_label;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      component.push_back(i);
      const int x = static_cast<int>(i % w);
      const int y = static_cast<int>(i / w);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
          if (mask.bits[j] && label[j] < 0) {
            label[j] = next_label;
            stack.push_back(j);
          }
        }
    }
    ++next_label;
    if (static_cast<double>(component.size()) >= min_area) {
      any = true;
      for (std::size_t i : component) kept.bits[i] = 1;
    }
  }

  if (!any) {
    log_warning("contour fill found no component above the minimum area; using an all-ones mask");
    return {BinaryMask(w, h, true), true};
  }

  // Background reachable from the border (4-connected) stays background;
  // everything else enclosed by the kept components is a hole.
  std::vector<std::uint8_t> outside(area, 0);
  stack.clear();
  auto seed = [&](int x, int y) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    if (!kept.bits[i] && !outside[i]) {
      outside[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  for (std::size_t i = 0; i < area; ++i)
    if (!outside[i]) kept.bits[i] = 1;
  return {std::move(kept), false};
}

GrayImage apply_mask(const GrayImage& img, const BinaryMask& mask) {
  if (img.width != mask.width || img.height != mask.height) throw ImageError("mask size does not match image");
  GrayImage out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i)
    if (!mask.bits[i]) out.pixels[i] = 0.0f;
  return out;
}

GrayImage preprocess_image(const GrayImage& img, const PipelineConfig& cfg) {
  const GrayImage sized = resize(img, cfg.target_width, cfg.target_height);
  const GrayImage shifted = mean_shift(sized, cfg.target_mean);
  const BinaryMask band = band_filter(shifted, cfg.band_low, cfg.band_high);
  const ContourFill filled = contour_fill(band, cfg.min_area_fraction);
  return apply_mask(shifted, filled.mask);
}

NormalizationStats standardize(std::vector<GrayImage>& images) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& img : images) {
    for (float p : img.pixels) sum += p;
    count += img.pixels.size();
  }
  if (count == 0) throw ZeroVarianceError("cannot standardize an empty dataset");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (const auto& img : images)
    for (float p : img.pixels) ss += (p - mean) * (p - mean);
  const double stddev = std::sqrt(ss / static_cast<double>(count));
  if (!(stddev > 0.0)) throw ZeroVarianceError("dataset has zero variance");
  for (auto& img : images)
    for (auto& p : img.pixels) p = static_cast<float>((p - mean) / stddev);
  return {mean, stddev};
}

DatasetSplit split(std::vector<LabeledImage> items, std::uint64_t seed, NormalizationStats stats) {
  if (items.empty()) throw DatasetError("cannot split an empty dataset");
  const int w = items.front().image.width;
  const int h = items.front().image.height;
  for (const auto& it : items) {
    if (it.image.width != w || it.image.height != h) throw DatasetError("images in one dataset must share a size");
    if (it.label > 1) throw DatasetError("labels must be 0 or 1");
  }

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  const auto counts = split_counts(items.size());
  DatasetSplit out;
  out.stats = stats;
  for (Dataset* d : {&out.train, &out.dev, &out.test}) {
    d->height = h;
    d->width = w;
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& item = items[order[k]];
    Dataset& dst = k < counts.train ? out.train : (k < counts.train + counts.dev ? out.dev : out.test);
    dst.push_back(item.image.pixels, item.label);
  }
  return out;
}

DatasetSplit build_dataset(std::vector<LabeledImage> raw, const PipelineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<GrayImage> images;
  images.reserve(raw.size());
  for (const auto& item : raw) images.push_back(preprocess_image(item.image, cfg));
  const NormalizationStats stats = standardize(images);
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i].image = std::move(images[i]);
  return split(std::move(raw), seed, stats);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "filename,label") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0)
      throw DatasetError(path + ":" + std::to_string(lineno) + ": expected filename,label");
    const std::string label = line.substr(comma + 1);
    if (label != "0" && label != "1")
      throw DatasetError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    entries.push_back({line.substr(0, comma), static_cast<std::uint8_t>(label == "1")});
  }
  if (entries.empty()) throw DatasetError(path + ": manifest lists no images");
  return entries;
}

std::uint64_t dataset_hash(const DatasetSplit& split) {
  Fnv1a h;
  auto put_u64 = [&](std::uint64_t v) {
    std::uint8_t bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(v >> (8 * i));
    h.update(bytes);
  };
  for (const Dataset* d : {&split.train, &split.dev, &split.test}) {
    put_u64(d->size());
    put_u64(static_cast<std::uint64_t>(d->height));
    put_u64(static_cast<std::uint64_t>(d->width));
    h.update(d->labels);
    for (float p : d->pixels) put_u64(std::bit_cast<std::uint32_t>(p));
  }
  put_u64(std::bit_cast<std::uint64_t>(split.stats.mean));
  put_u64(std::bit_cast<std::uint64_t>(split.stats.stddev));
  return h.digest();
}

}  // namespace dndx
