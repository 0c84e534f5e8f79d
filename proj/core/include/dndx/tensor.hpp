#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dndx {

/// Batch x channels x height x width. Dense (n, features) data uses h = w = 1.
struct Dims {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  bool operator==(const Dims&) const = default;
  std::size_t count() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t per_item() const { return static_cast<std::size_t>(c) * h * w; }
  std::string str() const;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Contiguous row-major float32 tensor.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, float fill = 0.0f);
  Tensor(Dims dims, std::vector<float> data);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  float at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// View of one batch item's values.
  std::span<float> item(int n) { return {data_.data() + n * dims_.per_item(), dims_.per_item()}; }
  std::span<const float> item(int n) const {
    return {data_.data() + n * dims_.per_item(), dims_.per_item()};
  }

  void fill(float v);
  /// Same data, new dims with identical element count.
  Tensor reshaped(Dims dims) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }

  Dims dims_{0, 0, 0, 0};
  std::vector<float> data_;
};

}  // namespace dndx
