#pragma once

// Slow reference implementations used as test oracles. Written directly from
// the definitions, in double precision, sharing no code with the library.

#include <cstdint>
#include <functional>
#include <vector>

#include "dndx/evalstats.hpp"
#include "dndx/image.hpp"
#include "dndx/rng.hpp"
#include "dndx/tensor.hpp"

namespace oracle {

using dndx::Tensor;

/// Direct nested-loop cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
Tensor maxpool(const Tensor& x, int kernel, int stride);
Tensor avgpool(const Tensor& x, int kernel, int stride);
Tensor fc(const Tensor& x, const Tensor& w, const Tensor& b);
double softmax_xent(const Tensor& logits, const std::vector<int>& labels);

/// Central difference of f with respect to every element of `at`.
std::vector<double> numeric_gradient(Tensor& at, const std::function<double()>& f, float step);

/// ||a - n|| / max(||a||, ||n||, floor)
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric, double floor = 1e-12);

/// Multiples of 1/8 in [-2, 2]: sums of products stay exact in float32.
Tensor dyadic(dndx::Dims dims, dndx::Rng& rng);

/// Counts with a lookup table instead of branches.
dndx::ContingencyTable count_outcomes(const std::vector<int>& predicted, const std::vector<int>& actual);

/// Component sizes of set bits under 8-connectivity, by union-find.
std::vector<std::size_t> component_sizes(const dndx::BinaryMask& mask);

}  // namespace oracle
