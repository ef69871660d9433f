#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stgen/algebra.hpp"
#include "stgen/stt.hpp"

namespace stgen {

struct ArrayDims {
  std::int64_t rows = 16;
  std::int64_t cols = 16;

  std::int64_t pes() const { return rows * cols; }
  bool operator==(const ArrayDims&) const = default;
};

/// Parses "16x16" (also accepts 'X' or '*').
ArrayDims parse_array_dims(const std::string& text);
std::string to_string(const ArrayDims& dims);

enum class LoopRole { Selected, Sequential, Replicated };

std::string to_string(LoopRole role);
LoopRole loop_role_from_string(const std::string& s);

/// One loop of the stage nest. A Selected loop walks tiles of a mapped
/// iterator, a Sequential loop walks an unmapped iterator one value per
/// stage, and a Replicated loop hands consecutive values to the replicas
/// executing side by side.
struct StageLoop {
  std::size_t iterator = 0;
  std::string name;
  std::int64_t bound = 1;
  std::int64_t step = 1;  // tile size, replica count, or 1
  std::int64_t trip = 1;  // ceil(bound / step)
  LoopRole role = LoopRole::Sequential;

  bool operator==(const StageLoop&) const = default;
};

struct TilingOptions {
  ArrayDims array;
  /// Largest cycle span of a searched tile; 0 means unlimited.
  std::int64_t time_budget = 0;
  /// Stack copies of the mapped tile into spare rows/columns, each copy
  /// taking a different value of an unmapped output loop.
  bool replicate = true;
  /// Tile sizes of the selected loops; searched when absent.
  std::optional<std::array<std::int64_t, 3>> fixed_tile;
};

struct TilePlan {
  std::array<std::size_t, 3> selected{};
  std::array<std::int64_t, 3> tile{1, 1, 1};
  /// PE rows/cols one replica occupies for a full tile.
  std::array<std::int64_t, 2> extent{1, 1};
  /// Cycles spanned by a full tile (t range).
  std::int64_t time_extent = 1;
  /// Added to T*x so that a full tile starts at PE (0,0), cycle 0.
  std::array<std::int64_t, 3> origin{};
  std::int64_t replicas = 1;
  std::array<std::int64_t, 2> replica_grid{1, 1};
  std::optional<std::size_t> replicated_iterator;
  std::vector<StageLoop> nest;  // outermost first
  std::int64_t stage_count = 1;
  std::vector<std::string> warnings;
};

/// Rows/cols/cycles spanned by the image of a tile box under T.
std::array<std::int64_t, 3> image_extent(const IntMatrix& t, const std::array<std::int64_t, 3>& box);

/// Normalization offset for a tile box: -(minimum of T*x over the box).
std::array<std::int64_t, 3> image_origin(const IntMatrix& t, const std::array<std::int64_t, 3>& box);

/// Chooses tile sizes for the selected loops so the mapped tile fits the
/// array (and the time budget when searching), then builds the stage nest.
/// Boundary tiles may be partial; every iteration is covered exactly once.
/// Throws std::invalid_argument when a fixed tile does not fit.
TilePlan select_loops_and_tile(const TensorAlgebra& algebra, const SttMatrix& t, const TilingOptions& options);

}  // namespace stgen
