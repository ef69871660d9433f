#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "stgen/algebra.hpp"
#include "stgen/tensor.hpp"

namespace stgen {

template <typename T>
using TensorMap = std::map<std::string, Tensor<T>>;

/// Direct loop-nest evaluation in iterator declaration order (last iterator
/// innermost). Throws std::invalid_argument when an input is missing or its
/// extents differ from the ones the algebra implies.
template <typename T>
Tensor<T> reference_execute(const TensorAlgebra& algebra, const TensorMap<T>& inputs);

/// Throws std::invalid_argument describing the first mismatch.
template <typename T>
void check_input_extents(const TensorAlgebra& algebra, const TensorMap<T>& inputs);

/// Uniform random inputs in [lo, hi] for every input tensor of `algebra`.
TensorMap<std::int64_t> random_int_inputs(const TensorAlgebra& algebra, std::uint64_t seed, std::int64_t lo = -4,
                                          std::int64_t hi = 4);
TensorMap<double> random_real_inputs(const TensorAlgebra& algebra, std::uint64_t seed);

}  // namespace stgen
