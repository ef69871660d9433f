#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stgen {

enum class DType : std::uint32_t { Int64 = 1, Float64 = 2 };

std::string to_string(DType d);
DType dtype_from_string(const std::string& s);

/// Dense row-major tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> extents, T fill = T{})
      : extents_(std::move(extents)), data_(static_cast<std::size_t>(count(extents_)), fill) {}
  Tensor(std::vector<std::int64_t> extents, std::vector<T> data) : extents_(std::move(extents)), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != count(extents_))
      throw std::invalid_argument("tensor data size does not match extents");
  }

  const std::vector<std::int64_t>& extents() const { return extents_; }
  std::size_t rank() const { return extents_.size(); }
  std::size_t size() const { return data_.size(); }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool contains(std::span<const std::int64_t> index) const {
    if (index.size() != extents_.size()) return false;
    for (std::size_t d = 0; d < index.size(); ++d)
      if (index[d] < 0 || index[d] >= extents_[d]) return false;
    return true;
  }

  std::size_t offset(std::span<const std::int64_t> index) const {
    std::int64_t off = 0;
    for (std::size_t d = 0; d < extents_.size(); ++d) off = off * extents_[d] + index[d];
    return static_cast<std::size_t>(off);
  }

  T& at(std::span<const std::int64_t> index) {
    if (!contains(index)) throw std::out_of_range("tensor index out of range");
    return data_[offset(index)];
  }
  const T& at(std::span<const std::int64_t> index) const {
    if (!contains(index)) throw std::out_of_range("tensor index out of range");
    return data_[offset(index)];
  }

  bool operator==(const Tensor&) const = default;

  static std::int64_t count(const std::vector<std::int64_t>& ext) {
    return std::accumulate(ext.begin(), ext.end(), std::int64_t{1}, std::multiplies<>());
  }

 private:
  std::vector<std::int64_t> extents_;
  std::vector<T> data_;
};

}  // namespace stgen
