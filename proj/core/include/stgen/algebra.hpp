#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stgen/linalg.hpp"

namespace stgen {

/// A loop iterator of the perfectly nested accumulation.
struct Iterator {
  std::string name;
  std::int64_t bound = 1;

  bool operator==(const Iterator&) const = default;
};

/// One tensor reference `T[e0, e1, ...]`. Row `d` of `access` holds the
/// coefficients of dimension `d`'s index expression over all iterators, so
/// `index = access * x + offsets` for an iteration vector `x`.
struct TensorAccess {
  std::string tensor;
  IntMatrix access;
  std::vector<std::int64_t> offsets;

  std::size_t rank() const { return access.rows(); }

  /// Tensor index touched by iteration `x` (one entry per iterator).
  std::vector<std::int64_t> index_of(std::span<const std::int64_t> x) const;

  bool operator==(const TensorAccess&) const = default;
};

/// A single `OUT[...] += IN1[...] * IN2[...] (* IN3[...])` statement with its
/// iteration domain. Iterator order is declaration order of the bounds.
struct TensorAlgebra {
  std::string name;
  std::vector<Iterator> iterators;
  TensorAccess output;
  std::vector<TensorAccess> inputs;
  std::vector<std::string> reduction_iterators;

  std::size_t num_iterators() const { return iterators.size(); }
  std::size_t iterator_index(std::string_view name) const;  // throws if absent
  bool has_iterator(std::string_view name) const;

  /// Inputs in declaration order followed by the output.
  std::vector<const TensorAccess*> tensors() const;

  /// Extent of every dimension of `access`'s tensor, inferred as the largest
  /// index reached over the iteration space plus one.
  std::vector<std::int64_t> extents(const TensorAccess& access) const;

  /// Iteration-space volume.
  std::int64_t volume() const;

  /// True when some access row sums two or more iterators (e.g. `y+p`).
  bool has_index_sums() const;

  bool operator==(const TensorAlgebra&) const = default;
};

/// Syntax or semantic error in a `.ta` statement. `line`/`column` are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Parses one statement, e.g.
///   `gemm: C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16`
/// The leading `name:` is optional; `#` starts a comment.
TensorAlgebra parse_tensor_algebra(std::string_view source);

/// Reads and parses a `.ta` file; an unnamed statement takes the file stem.
TensorAlgebra load_tensor_algebra(const std::string& path);

/// Canonical single-line rendering; `parse_tensor_algebra(to_string(a)) == a`.
std::string to_string(const TensorAlgebra& algebra);

}  // namespace stgen
