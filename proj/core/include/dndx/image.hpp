#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dndx {

/// Grayscale image with real-valued intensities, row-major. Raw 8-bit
/// images load as values in [0, 255].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f);

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  ///< 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false);

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t popcount() const;
  bool operator==(const BinaryMask&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  ///< interleaved R, G, B
  bool operator==(const RgbImage&) const = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary (P5) or ASCII (P2) PGM with maxval <= 255.
GrayImage read_pgm(const std::string& path);
/// Writes P5; values are rounded and clamped to [0, 255].
void write_pgm(const std::string& path, const GrayImage& img);

/// 8-bit PNG; colour inputs are converted to luma.
GrayImage read_png(const std::string& path);
void write_png(const std::string& path, const RgbImage& img);

/// Dispatches on the file signature.
GrayImage read_image(const std::string& path);

}  // namespace dndx
