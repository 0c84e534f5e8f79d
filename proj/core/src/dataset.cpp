#include "dndx/dataset.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "binary_io.hpp"

namespace dndx {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'D', 'S'};
constexpr int kCanonicalSide = 256;

}  // namespace

void Dataset::push_back(std::span<const float> img, std::uint8_t label) {
  if (img.size() != image_size()) throw DatasetError("image size does not match dataset");
  pixels.insert(pixels.end(), img.begin(), img.end());
  labels.push_back(label);
}

SplitCounts split_counts(std::size_t n) {
  const std::size_t tenth = n / 10;
  return {n - 2 * tenth, tenth, tenth};
}

void write_dataset(const std::string& path, const DatasetSplit& split) {
  const Dataset* parts[] = {&split.train, &split.dev, &split.test};
  const int h = split.train.height;
  const int w = split.train.width;
  std::size_t count = 0;
  for (const auto* p : parts) {
    if (p->size() > 0 && (p->height != h || p->width != w)) throw DatasetError("split image sizes differ");
    count += p->size();
  }
  const auto expected = split_counts(count);
  if (expected.train != split.train.size() || expected.dev != split.dev.size() || expected.test != split.test.size())
    throw DatasetError("split sizes are not the 80/10/10 partition of " + std::to_string(count) + " items");
  if (count > std::numeric_limits<std::uint32_t>::max()) throw DatasetError("too many items");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write dataset file " + path);
  const bool canonical = h == kCanonicalSide && w == kCanonicalSide;
  out.write(kMagic, 4);
  io::put_u16(out, canonical ? 1 : 2);
  io::put_u32(out, static_cast<std::uint32_t>(count));
  if (!canonical) {
    io::put_u32(out, static_cast<std::uint32_t>(h));
    io::put_u32(out, static_cast<std::uint32_t>(w));
  }
  for (const auto* p : parts)
    for (std::size_t i = 0; i < p->size(); ++i) {
      io::put_u8(out, p->labels[i]);
      io::put_f32s(out, p->image(i));
    }
  if (!out) throw DatasetError("failed writing dataset file " + path);
}

DatasetSplit read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset file " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw DatasetError(path + ": not a dataset file");
  const auto version = io::get_u16(in);
  const auto count = io::get_u32(in);
  int h = kCanonicalSide;
  int w = kCanonicalSide;
  if (version == 2) {
    h = static_cast<int>(io::get_u32(in));
    w = static_cast<int>(io::get_u32(in));
  } else if (version != 1) {
    throw DatasetError(path + ": unsupported dataset version " + std::to_string(version));
  }
  if (!in || h < 1 || w < 1) throw DatasetError(path + ": truncated header");

  const auto counts = split_counts(count);
  if (counts.dev == 0 || counts.test == 0)
    throw DatasetError(path + ": " + std::to_string(count) + " items leave an empty dev or test split");

  DatasetSplit split;
  Dataset* parts[] = {&split.train, &split.dev, &split.test};
  const std::size_t sizes[] = {counts.train, counts.dev, counts.test};
  std::vector<float> img(static_cast<std::size_t>(h) * w);
  for (int p = 0; p < 3; ++p) {
    parts[p]->height = h;
    parts[p]->width = w;
    parts[p]->pixels.reserve(sizes[p] * img.size());
    for (std::size_t i = 0; i < sizes[p]; ++i) {
      const auto label = io::get_u8(in);
      io::get_f32s(in, img);
      if (!in) throw DatasetError(path + ": truncated at item " + std::to_string(i));
      if (label > 1) throw DatasetError(path + ": label must be 0 or 1");
      parts[p]->push_back(img, label);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DatasetError(path + ": trailing bytes");

  const auto stats_path = std::filesystem::path(path).parent_path() / "stats.txt";
  if (std::filesystem::exists(stats_path)) split.stats = read_stats(stats_path.string());
  return split;
}

void write_stats(const std::string& path, const NormalizationStats& stats) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  out << std::setprecision(17) << "mean " << stats.mean << "\nstddev " << stats.stddev << "\n";
}

NormalizationStats read_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path);
  NormalizationStats stats;
  std::string key;
  double value;
  bool have_mean = false;
  bool have_std = false;
  while (in >> key >> value) {
    if (key == "mean") {
      stats.mean = value;
      have_mean = true;
    } else if (key == "stddev") {
      stats.stddev = value;
      have_std = true;
    } else {
      throw DatasetError(path + ": unknown key " + key);
    }
  }
  if (!have_mean || !have_std) throw DatasetError(path + ": expected mean and stddev");
  return stats;
}

}  // namespace dndx
