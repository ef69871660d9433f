#include "stgen/tiling.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace stgen {

ArrayDims parse_array_dims(const std::string& text) {
  const auto sep = text.find_first_of("xX*");
  if (sep == std::string::npos) throw std::invalid_argument("array dims must look like RxC, got '" + text + "'");
  ArrayDims d;
  try {
    std::size_t used = 0;
    d.rows = std::stoll(text.substr(0, sep), &used);
    if (used != sep) throw std::invalid_argument("");
    const std::string rest = text.substr(sep + 1);
    d.cols = std::stoll(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw std::invalid_argument("array dims must look like RxC, got '" + text + "'");
  }
  if (d.rows < 1 || d.cols < 1) throw std::invalid_argument("array dims must be positive");
  return d;
}

std::string to_string(const ArrayDims& dims) { return std::to_string(dims.rows) + "x" + std::to_string(dims.cols); }

std::string to_string(LoopRole role) {
  switch (role) {
    case LoopRole::Selected: return "selected";
    case LoopRole::Sequential: return "sequential";
    case LoopRole::Replicated: return "replicated";
  }
  return "?";
}

LoopRole loop_role_from_string(const std::string& s) {
  for (auto r : {LoopRole::Selected, LoopRole::Sequential, LoopRole::Replicated})
    if (to_string(r) == s) return r;
  throw std::invalid_argument("unknown loop role '" + s + "'");
}

std::array<std::int64_t, 3> image_extent(const IntMatrix& t, const std::array<std::int64_t, 3>& box) {
  std::array<std::int64_t, 3> ext{};
  for (std::size_t r = 0; r < 3; ++r) {
    std::int64_t span = 0;
    for (std::size_t j = 0; j < 3; ++j) span += std::llabs(t(r, j)) * (box[j] - 1);
    ext[r] = span + 1;
  }
  return ext;
}

std::array<std::int64_t, 3> image_origin(const IntMatrix& t, const std::array<std::int64_t, 3>& box) {
  std::array<std::int64_t, 3> origin{};
  for (std::size_t r = 0; r < 3; ++r) {
    std::int64_t lo = 0;
    for (std::size_t j = 0; j < 3; ++j) lo += std::min<std::int64_t>(0, t(r, j)) * (box[j] - 1);
    origin[r] = -lo;
  }
  return origin;
}

namespace {

std::array<std::int64_t, 3> search_tile(const TensorAlgebra& algebra, const IntMatrix& t,
                                        const std::array<std::size_t, 3>& sel, const TilingOptions& opt) {
  const std::int64_t budget = opt.time_budget > 0 ? opt.time_budget : std::int64_t{1} << 40;
  const std::array<std::int64_t, 3> limits{opt.array.rows, opt.array.cols, budget};
  std::array<std::int64_t, 3> max_tile{};
  for (std::size_t j = 0; j < 3; ++j) {
    std::int64_t m = algebra.iterators[sel[j]].bound;
    for (std::size_t r = 0; r < 3; ++r) {
      const std::int64_t c = std::llabs(t(r, j));
      if (c != 0) m = std::min(m, (limits[r] - 1) / c + 1);
    }
    max_tile[j] = std::max<std::int64_t>(1, m);
  }

  std::array<std::int64_t, 3> best{1, 1, 1};
  std::int64_t best_volume = 0, best_time = 0;
  std::array<std::int64_t, 3> box{};
  for (box[0] = max_tile[0]; box[0] >= 1; --box[0])
    for (box[1] = max_tile[1]; box[1] >= 1; --box[1])
      for (box[2] = max_tile[2]; box[2] >= 1; --box[2]) {
        const std::int64_t volume = box[0] * box[1] * box[2];
        if (volume < best_volume) break;
        const auto ext = image_extent(t, box);
        if (ext[0] > limits[0] || ext[1] > limits[1] || ext[2] > limits[2]) continue;
        // Descending scan: ties keep the lexicographically largest tile
        // unless a strictly shorter stage is found.
        if (volume > best_volume || ext[2] < best_time) {
          best = box;
          best_volume = volume;
          best_time = ext[2];
        }
      }
  return best;
}

}  // namespace

TilePlan select_loops_and_tile(const TensorAlgebra& algebra, const SttMatrix& t, const TilingOptions& opt) {
  if (opt.array.rows < 1 || opt.array.cols < 1) throw std::invalid_argument("array dims must be positive");
  if (!validate_stt(t)) throw std::invalid_argument("STT matrix is singular");

  TilePlan plan;
  plan.selected = resolve_selection(algebra, t);
  const IntMatrix& T = t.entries;

  if (opt.fixed_tile) {
    plan.tile = *opt.fixed_tile;
    for (std::size_t j = 0; j < 3; ++j) {
      if (plan.tile[j] < 1) throw std::invalid_argument("tile sizes must be positive");
      plan.tile[j] = std::min(plan.tile[j], algebra.iterators[plan.selected[j]].bound);
    }
  } else {
    plan.tile = search_tile(algebra, T, plan.selected, opt);
  }

  const auto ext = image_extent(T, plan.tile);
  if (ext[0] > opt.array.rows || ext[1] > opt.array.cols)
    throw std::invalid_argument("tile " + std::to_string(plan.tile[0]) + "x" + std::to_string(plan.tile[1]) + "x" +
                                std::to_string(plan.tile[2]) + " maps to " + std::to_string(ext[0]) + "x" +
                                std::to_string(ext[1]) + " PEs, larger than the " + to_string(opt.array) + " array");
  plan.extent = {ext[0], ext[1]};
  plan.time_extent = ext[2];
  plan.origin = image_origin(T, plan.tile);

  for (std::size_t j = 0; j < 3; ++j) {
    const bool spatial = T(0, j) != 0 || T(1, j) != 0;
    if (spatial && algebra.iterators[plan.selected[j]].bound == 1)
      plan.warnings.push_back("iterator '" + algebra.iterators[plan.selected[j]].name +
                              "' has bound 1 in a spatial slot; the array is guaranteed under-utilized");
  }

  auto is_selected = [&](std::size_t i) { return std::find(plan.selected.begin(), plan.selected.end(), i) != plan.selected.end(); };
  auto is_reduction = [&](std::size_t i) {
    const auto& r = algebra.reduction_iterators;
    return std::find(r.begin(), r.end(), algebra.iterators[i].name) != r.end();
  };

  if (opt.replicate) {
    const std::int64_t rr = opt.array.rows / plan.extent[0];
    const std::int64_t rc = opt.array.cols / plan.extent[1];
    if (rr * rc > 1) {
      for (std::size_t i = 0; i < algebra.num_iterators(); ++i) {
        if (is_selected(i) || is_reduction(i) || algebra.iterators[i].bound < 2) continue;
        plan.replicated_iterator = i;
        plan.replicas = std::min(rr * rc, algebra.iterators[i].bound);
        plan.replica_grid = {rr, rc};
        break;
      }
    }
  }

  plan.stage_count = 1;
  for (std::size_t i = 0; i < algebra.num_iterators(); ++i) {
    StageLoop loop;
    loop.iterator = i;
    loop.name = algebra.iterators[i].name;
    loop.bound = algebra.iterators[i].bound;
    if (is_selected(i)) {
      const auto slot = static_cast<std::size_t>(std::find(plan.selected.begin(), plan.selected.end(), i) - plan.selected.begin());
      loop.role = LoopRole::Selected;
      loop.step = plan.tile[slot];
    } else if (plan.replicated_iterator == i) {
      loop.role = LoopRole::Replicated;
      loop.step = plan.replicas;
    } else {
      loop.role = LoopRole::Sequential;
      loop.step = 1;
    }
    loop.trip = ceil_div(loop.bound, loop.step);
    plan.stage_count *= loop.trip;
    plan.nest.push_back(std::move(loop));
  }
  return plan;
}

}  // namespace stgen
