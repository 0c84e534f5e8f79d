#include "dndx/tensor.hpp"

#include <algorithm>

namespace dndx {

std::string Dims::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

Tensor::Tensor(Dims dims, float fill) : dims_(dims) {
  if (dims.n < 1 || dims.c < 1 || dims.h < 1 || dims.w < 1)
    throw ShapeMismatch("tensor dimensions must be >= 1, got " + dims.str());
  data_.assign(dims.count(), fill);
}

Tensor::Tensor(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
  if (dims.n < 1 || dims.c < 1 || dims.h < 1 || dims.w < 1)
    throw ShapeMismatch("tensor dimensions must be >= 1, got " + dims.str());
  if (data_.size() != dims.count())
    throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) + " does not match " +
                        dims.str());
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Dims dims) const {
  if (dims.count() != data_.size())
    throw ShapeMismatch("cannot reshape " + dims_.str() + " to " + dims.str());
  return Tensor(dims, data_);
}

}  // namespace dndx
