#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace stgen {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

using Vec3 = std::array<std::int64_t, 3>;

/// Small dense row-major integer matrix.
class IntMatrix {
 public:
  IntMatrix() = default;
  IntMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
  IntMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows);

  static IntMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::int64_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::int64_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const std::int64_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<std::int64_t> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  /// Copies the listed columns, in the listed order.
  IntMatrix select_columns(std::span<const std::size_t> columns) const;

  std::vector<std::int64_t> operator*(std::span<const std::int64_t> v) const;
  IntMatrix operator*(const IntMatrix& rhs) const;

  bool operator==(const IntMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int64_t> data_;
};

std::ostream& operator<<(std::ostream& os, const IntMatrix& m);

/// Dense row-major matrix over exact rationals.
class RationalMatrix {
 public:
  RationalMatrix() = default;
  RationalMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  explicit RationalMatrix(const IntMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Rational& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Rational& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  RationalMatrix operator*(const RationalMatrix& rhs) const;
  std::vector<Rational> operator*(std::span<const Rational> v) const;

  bool operator==(const RationalMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Rational> data_;
};

/// Exact determinant of a square integer matrix (fraction-free elimination).
BigInt determinant(const IntMatrix& m);

/// Classical adjugate of a 3x3 matrix; `m * adjugate(m) == det(m) * I`.
IntMatrix adjugate3(const IntMatrix& m);

/// Exact inverse; throws std::domain_error when singular.
RationalMatrix inverse(const IntMatrix& m);

/// Reduced row echelon form in place; returns the pivot columns.
std::vector<std::size_t> rref(RationalMatrix& m);

std::size_t rank(const RationalMatrix& m);

/// Basis of the right kernel, one vector per free column of the RREF.
std::vector<std::vector<Rational>> nullspace(const RationalMatrix& m);

/// Scales a rational vector to the unique primitive integer vector with the
/// same direction and sign (gcd of entries is 1). Zero maps to zero.
std::vector<std::int64_t> to_primitive(std::span<const Rational> v);

std::int64_t gcd_of(std::span<const std::int64_t> v);

/// Returns (g, x, y) with a*x + b*y == g == gcd(a, b) >= 0.
std::array<std::int64_t, 3> extended_gcd(std::int64_t a, std::int64_t b);

std::int64_t floor_div(std::int64_t a, std::int64_t b);
std::int64_t ceil_div(std::int64_t a, std::int64_t b);

std::string to_string(const Vec3& v);

}  // namespace stgen
