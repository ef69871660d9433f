#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>

#include "stgen/tensor.hpp"

namespace stgen {

using AnyTensor = std::variant<Tensor<std::int64_t>, Tensor<double>>;

/// Binary layout (little-endian): "TNSR", u32 dtype, u64 rank, u64 extents
/// per dimension, then row-major elements (int64 or float64).
void write_tensor(std::ostream& os, const AnyTensor& t);
AnyTensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const AnyTensor& t);
AnyTensor load_tensor(const std::string& path);

/// Small text tensors: first line holds the extents, remaining lines hold
/// the values in row-major order; commas and whitespace both separate.
AnyTensor parse_csv_tensor(const std::string& text, DType dtype);
AnyTensor load_csv_tensor(const std::string& path, DType dtype);

/// Loads by extension: ".csv" as text (int64 unless a value has a decimal
/// point or exponent), anything else as binary.
AnyTensor load_any_tensor(const std::string& path);

template <typename T>
Tensor<T> convert_tensor(const AnyTensor& t) {
  return std::visit(
      [](const auto& src) {
        std::vector<T> data(src.data().begin(), src.data().end());
        return Tensor<T>(src.extents(), std::move(data));
      },
      t);
}

}  // namespace stgen
