#include "stgen/reference.hpp"

#include <random>
#include <stdexcept>

namespace stgen {

namespace {

std::string extents_str(const std::vector<std::int64_t>& e) {
  std::string s = "[";
  for (std::size_t i = 0; i < e.size(); ++i) s += (i ? "," : "") + std::to_string(e[i]);
  return s + "]";
}

}  // namespace

template <typename T>
void check_input_extents(const TensorAlgebra& algebra, const TensorMap<T>& inputs) {
  for (const auto& in : algebra.inputs) {
    const auto it = inputs.find(in.tensor);
    if (it == inputs.end()) throw std::invalid_argument("missing input tensor " + in.tensor);
    const auto want = algebra.extents(in);
    if (it->second.extents() != want)
      throw std::invalid_argument("extent mismatch for " + in.tensor + ": got " + extents_str(it->second.extents()) +
                                  ", expected " + extents_str(want));
  }
}

template <typename T>
Tensor<T> reference_execute(const TensorAlgebra& algebra, const TensorMap<T>& inputs) {
  check_input_extents(algebra, inputs);
  Tensor<T> out(algebra.extents(algebra.output));
  std::vector<const Tensor<T>*> src;
  for (const auto& in : algebra.inputs) src.push_back(&inputs.at(in.tensor));

  const std::size_t n = algebra.num_iterators();
  std::vector<std::int64_t> x(n, 0);
  for (;;) {
    T prod = T{1};
    for (std::size_t k = 0; k < src.size(); ++k) prod *= src[k]->at(algebra.inputs[k].index_of(x));
    out.at(algebra.output.index_of(x)) += prod;
    std::size_t d = n;
    while (d > 0) {
      --d;
      if (++x[d] < algebra.iterators[d].bound) break;
      x[d] = 0;
      if (d == 0) return out;
    }
    if (n == 0) return out;
  }
}

TensorMap<std::int64_t> random_int_inputs(const TensorAlgebra& algebra, std::uint64_t seed, std::int64_t lo, std::int64_t hi) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  TensorMap<std::int64_t> out;
  for (const auto& in : algebra.inputs) {
    if (out.count(in.tensor)) continue;
    Tensor<std::int64_t> t(algebra.extents(in));
    for (auto& v : t.data()) v = dist(rng);
    out.emplace(in.tensor, std::move(t));
  }
  return out;
}

TensorMap<double> random_real_inputs(const TensorAlgebra& algebra, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  TensorMap<double> out;
  for (const auto& in : algebra.inputs) {
    if (out.count(in.tensor)) continue;
    Tensor<double> t(algebra.extents(in));
    for (auto& v : t.data()) v = dist(rng);
    out.emplace(in.tensor, std::move(t));
  }
  return out;
}

template Tensor<std::int64_t> reference_execute(const TensorAlgebra&, const TensorMap<std::int64_t>&);
template Tensor<double> reference_execute(const TensorAlgebra&, const TensorMap<double>&);
template void check_input_extents(const TensorAlgebra&, const TensorMap<std::int64_t>&);
template void check_input_extents(const TensorAlgebra&, const TensorMap<double>&);

}  // namespace stgen
