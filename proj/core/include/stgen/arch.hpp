#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stgen/algebra.hpp"
#include "stgen/stt.hpp"
#include "stgen/tiling.hpp"

namespace stgen {

/// PE-internal I/O module templates. The letter is the template id used in
/// reports: a..f in declaration order.
enum class PeModuleKind { SystolicIn, SystolicOut, StationaryIn, StationaryOut, PassIn, PassOut };

char module_letter(PeModuleKind kind);
PeModuleKind module_from_letter(char letter);
std::string to_string(PeModuleKind kind);

/// Raised when a dataflow is paired with the wrong I/O role.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised for design points the generator does not build, e.g. links
/// between non-adjacent PEs.
class UnsupportedDesign : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One module for 1-D kinds and unicast; two for Reuse2D sub-kinds.
std::vector<PeModuleKind> select_pe_module(const TensorDataflow& dataflow);

struct PeCoord {
  std::int64_t row = 0;
  std::int64_t col = 0;

  auto operator<=>(const PeCoord&) const = default;
};

/// Per-tensor slice of the architecture: module choice plus everything the
/// address generators need to know about the tensor.
struct TensorPlan {
  std::string tensor;
  IoRole role = IoRole::Input;
  std::vector<PeModuleKind> modules;
  TensorDataflow dataflow;
  ReuseLattice lattice;
  IntMatrix access;  // over all iterators
  std::vector<std::int64_t> offsets;
  std::vector<std::int64_t> extents;
};

struct Link {
  std::string tensor;
  PeCoord src;
  PeCoord dst;
  std::int64_t delay = 1;
};

struct MulticastGroup {
  std::string tensor;
  std::int64_t bank = -1;
  std::int64_t replica = 0;
  std::vector<PeCoord> members;  // ordered along the line
  bool diagonal = false;
};

struct ReductionTree {
  std::string tensor;
  std::int64_t bank = -1;
  std::int64_t replica = 0;
  std::vector<PeCoord> members;  // leaf order
  std::int64_t arity = 2;
  std::int64_t depth = 0;
};

enum class BankRole {
  Inject,           // systolic chain heads
  Drain,            // systolic output chain tails
  Multicast,        // one line of PEs, same cycle
  Broadcast,        // every PE of a replica
  Unicast,          // one PE, streaming
  StationaryLoad,   // one PE (or one line), stage boundaries
  StationaryDrain,  // one PE, stage boundaries
  TreeRoot,         // output of a reduction tree
};

std::string to_string(BankRole role);
BankRole bank_role_from_string(const std::string& s);

/// Address generator of a bank: for an active PE at replica-local p and
/// normalized cycle t,
///   index = (space_time * ((p, t) - origin)) / denominator
///         + sequential * stage_origin + offsets
/// where space_time = A_sel * adj(T) and denominator = det(T), i.e. the
/// affine map A * T^-1 plus the stage's sequential-loop offsets.
struct AddressStream {
  IntMatrix space_time;
  std::int64_t denominator = 1;
  std::array<std::int64_t, 3> origin{};
  IntMatrix sequential;
  std::vector<std::int64_t> offsets;
};

struct BankDescriptor {
  std::string tensor;
  std::int64_t id = 0;
  BankRole role = BankRole::Unicast;
  std::int64_t replica = 0;
  std::vector<PeCoord> pes;
  AddressStream stream;
};

struct StageEvent {
  std::string kind;  // "load", "swap", "drain"
  std::string tensor;
  std::string when;  // "before-first-stage", "stage-boundary", "after-last-stage"
  std::int64_t window = 1;
  bool double_buffered = false;
};

/// Controller description: the mapped tile, the stage nest, and the cycle
/// budget of one stage.
struct StageSchedule {
  std::array<std::string, 3> selection;
  IntMatrix stt = IntMatrix::identity(3);
  IntMatrix adjugate = IntMatrix::identity(3);
  std::int64_t determinant = 1;
  std::array<std::int64_t, 3> origin{};
  std::array<std::int64_t, 3> tile{1, 1, 1};
  std::array<std::int64_t, 2> extent{1, 1};
  std::int64_t time_extent = 1;
  std::vector<StageLoop> nest;
  std::int64_t stage_count = 1;  // product of nest trip counts
  std::int64_t replicas = 1;
  std::vector<PeCoord> replica_origins;
  std::int64_t compute_cycles_per_stage = 1;  // largest MAC count of one PE (full tile)
  std::int64_t fill_drain_cycles = 0;         // skew + output path latency (full tile)
  std::int64_t drain_latency = 0;             // deepest streaming reduction tree
  std::int64_t cycles_per_stage = 1;          // time_extent + drain_latency
  std::int64_t occupied_pes = 1;              // active PEs of one replica
  std::vector<StageEvent> events;
};

struct ComputeCell {
  std::int64_t operands = 2;
  bool accumulate = true;
  std::string statement;
};

struct ArchSpec {
  ArrayDims array;
  std::vector<TensorPlan> pe_modules;  // inputs in order, then the output
  std::vector<Link> links;
  std::vector<MulticastGroup> multicast_groups;
  std::vector<ReductionTree> reduction_trees;
  std::vector<BankDescriptor> banks;
  StageSchedule stages;
  ComputeCell compute_cell;

  const TensorPlan& tensor(const std::string& name) const;
  std::int64_t occupied_pes() const { return stages.occupied_pes * stages.replicas; }
};

/// Steps (space-time) whose spatial part must join neighbouring PEs.
std::vector<Vec3> required_adjacent_steps(const TensorDataflow& dataflow, const ReuseLattice& lattice);

/// Throws UnsupportedDesign if any tensor needs a non-adjacent connection.
void check_adjacency(const DataflowAnalysis& analysis);

/// Which PEs of one replica (coordinates relative to the replica corner)
/// execute at least one iteration, over every stage shape.
struct ReplicaGeometry {
  std::array<std::int64_t, 2> extent{1, 1};
  std::vector<std::array<std::int64_t, 3>> shapes;
  std::vector<bool> active;  // row-major over extent

  bool is_active(PeCoord p) const;
  std::int64_t active_count() const;
  static ReplicaGeometry full(std::array<std::int64_t, 2> extent);
};

/// Box sizes of the selected loops that occur over all stages (full tile
/// plus partial boundary tiles).
std::vector<std::array<std::int64_t, 3>> stage_shapes(const TilePlan& plan, const TensorAlgebra& algebra);

ReplicaGeometry replica_geometry(const TilePlan& plan, const SttMatrix& t, const TensorAlgebra& algebra);

/// Partial results of generation; `generate_arch` runs all steps.
struct Interconnect {
  std::vector<Link> links;
  std::vector<MulticastGroup> multicast_groups;
  std::vector<ReductionTree> reduction_trees;
};

/// Links, multicast lines and reduction trees of one replica (coordinates
/// relative to the replica corner). Lines are maximal runs of active PEs.
/// Throws UnsupportedDesign on non-adjacent steps.
Interconnect build_interconnect(const std::vector<TensorPlan>& tensors, const ReplicaGeometry& geometry);

/// Banks for one replica; multicast groups and trees get their bank id.
std::vector<BankDescriptor> assign_banks(const std::vector<TensorPlan>& tensors, const SttMatrix& t,
                                         const TilePlan& plan, const ReplicaGeometry& geometry, Interconnect& net);

StageSchedule build_controller(const TilePlan& plan, const SttMatrix& t, const std::vector<TensorPlan>& tensors,
                               const Interconnect& net, const ReplicaGeometry& geometry);

struct GenerateOptions {
  TilingOptions tiling;
};

/// analysis -> tiling -> PE modules -> interconnect -> banks -> controller,
/// replicated over the replica grid.
ArchSpec generate_arch(const TensorAlgebra& algebra, const SttMatrix& t, const GenerateOptions& options);

/// Structural checks. Each returns an empty string when the property holds,
/// otherwise a description of the first violation.
std::string check_port_driving(const ArchSpec& arch);
std::string check_delay_consistency(const ArchSpec& arch);
std::string check_tree_partition(const ArchSpec& arch);

/// Replica-local iteration executed by `pe` at normalized cycle `t` in a
/// tile box, if any.
std::optional<std::array<std::int64_t, 3>> active_iteration(const StageSchedule& s, PeCoord local, std::int64_t t,
                                                            const std::array<std::int64_t, 3>& box);

/// Inclusive normalized cycle range touched by a tile box.
std::pair<std::int64_t, std::int64_t> active_cycle_range(const StageSchedule& s, const std::array<std::int64_t, 3>& box);

/// Stage shapes recovered from the controller's nest.
std::vector<std::array<std::int64_t, 3>> schedule_shapes(const StageSchedule& s);

/// Replica-local activity mask recovered from the controller.
ReplicaGeometry schedule_geometry(const StageSchedule& s);

}  // namespace stgen
