#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stgen/algebra.hpp"
#include "stgen/arch.hpp"
#include "stgen/stt.hpp"
#include "stgen/tiling.hpp"

namespace stgen {

/// One (selection, T, tiling) choice and the dataflows it induces.
struct DesignPoint {
  std::string algebra;
  std::array<std::string, 3> selection;
  IntMatrix stt = IntMatrix::identity(3);
  std::array<std::int64_t, 3> tile{1, 1, 1};
  std::vector<TensorDataflow> dataflows;  // inputs in order, then the output
  std::string name;                        // e.g. "MNK-SST"

  SttMatrix stt_matrix() const { return {stt, selection}; }
};

/// Per-tensor kind and reuse direction, the key used to collapse T matrices
/// that build identical hardware.
std::string dataflow_signature(const DesignPoint& p);

/// Letters only, e.g. "SST".
std::string family_code(const DesignPoint& p);

struct EnumerateOptions {
  ArrayDims array;
  std::vector<std::int64_t> alphabet{-1, 0, 1};
  std::int64_t time_budget = 0;
  std::size_t workers = 1;
};

/// Every full-rank 3x3 matrix over `alphabet`, row-major lexicographic in
/// alphabet order.
std::vector<IntMatrix> full_rank_matrices(const std::vector<std::int64_t>& alphabet);

/// All ordered triples of distinct iterators, in declaration order.
std::vector<std::array<std::string, 3>> ordered_selections(const TensorAlgebra& algebra);

/// Legal, deduplicated design points in deterministic order: selections
/// outermost, then matrices; the first T of each signature is kept.
std::vector<DesignPoint> enumerate_designs(const TensorAlgebra& algebra, const EnumerateOptions& options);

struct CostWeights {
  // Per module instance per occupied PE.
  double stationary = 4;
  double systolic = 2;
  double pass = 1;
  // Interconnect.
  double link = 1;
  double multicast_member = 2;
  double tree_adder = 3;
  double bank = 4;
  // Events.
  double mac = 1;
  double hop = 1;
  double multicast_delivery = 3;
  double tree_add = 2;
  double bank_access = 2;
  double stationary_load = 2;
};

struct TensorDemand {
  std::string tensor;
  std::int64_t peak = 0;  // bank transfers per cycle, worst cycle
};

struct CostReport {
  std::int64_t est_cycles = 0;
  double utilization = 0;
  std::vector<TensorDemand> bandwidth;
  std::int64_t bw_peak = 0;
  std::int64_t stall_factor = 1;
  double area_proxy = 0;
  double interconnect_area = 0;
  double energy_proxy = 0;
  std::optional<std::int64_t> sim_cycles;
};

TilingOptions tiling_for(const EnumerateOptions& options, const TensorAlgebra& algebra,
                         const std::array<std::size_t, 3>& selected);

ArchSpec build_point(const TensorAlgebra& algebra, const DesignPoint& point, ArrayDims array);

CostReport estimate_cost(const ArchSpec& arch, std::int64_t bandwidth_cap, const CostWeights& weights = {});
CostReport estimate_cost(const TensorAlgebra& algebra, const DesignPoint& point, ArrayDims array,
                         std::int64_t bandwidth_cap, const CostWeights& weights = {});

struct ExploreOptions {
  EnumerateOptions enumerate;
  std::int64_t bandwidth_cap = 0;
  CostWeights weights;
  /// Simulate this many of the fastest estimated points.
  std::size_t simulate_top = 0;
  std::uint64_t seed = 1;
};

struct ExploreResult {
  std::string status = "ok";  // "empty" when no legal point exists
  std::vector<DesignPoint> points;  // sorted by est_cycles, ties in enumeration order
  std::vector<CostReport> costs;
  std::vector<std::size_t> pareto;  // indices into points
  std::size_t families = 0;         // distinct letter codes
};

ExploreResult explore(const TensorAlgebra& algebra, const ExploreOptions& options);

/// Indices of points not dominated on (est_cycles, area_proxy, energy_proxy).
std::vector<std::size_t> pareto_front(const std::vector<CostReport>& costs);

std::string explore_csv(const ExploreResult& result);

std::string format_tile(const std::array<std::int64_t, 3>& tile);

}  // namespace stgen
