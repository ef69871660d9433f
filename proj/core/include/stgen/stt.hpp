#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stgen/algebra.hpp"
#include "stgen/linalg.hpp"

namespace stgen {

/// A 3x3 space-time transformation over three selected loops. Rows 0 and 1
/// produce the PE coordinates, row 2 the cycle.
struct SttMatrix {
  IntMatrix entries = IntMatrix::identity(3);
  std::array<std::string, 3> selected_iterators;

  bool operator==(const SttMatrix&) const = default;
};

/// Parses "1,0,0;0,1,0;1,1,1" (rows separated by ';').
IntMatrix parse_stt_entries(const std::string& text);
std::string format_stt_entries(const IntMatrix& t);

struct LegalityVerdict {
  bool legal = false;
  BigInt determinant = 0;

  explicit operator bool() const { return legal; }
};

/// Legal iff T is full rank.
LegalityVerdict validate_stt(const SttMatrix& t);

/// Throws std::invalid_argument unless the selection names three distinct
/// iterators of `algebra`. Returns their indices in selection order.
std::array<std::size_t, 3> resolve_selection(const TensorAlgebra& algebra, const SttMatrix& t);

struct SpaceTimePoint {
  std::array<std::int64_t, 2> p{};
  std::int64_t t = 0;

  bool operator==(const SpaceTimePoint&) const = default;
  auto operator<=>(const SpaceTimePoint&) const = default;
};

SpaceTimePoint space_time_map(const SttMatrix& t, std::span<const std::int64_t> x);

/// Kernel of A*T^-1 as primitive integer (dp_x, dp_y, dt) vectors.
///
/// Canonical form: a 1-D kernel holds one vector with dt > 0, or dt == 0 and
/// first nonzero spatial entry > 0. A 2-D kernel holds a dt == 0 vector
/// followed by a companion with the smallest positive dt of the plane's
/// integer lattice, reduced against the first vector (when the plane is
/// dt == 0 itself both vectors are flat). A 3-D kernel is the unit basis.
struct ReuseSpace {
  int dimension = 0;
  std::vector<Vec3> basis;

  bool operator==(const ReuseSpace&) const = default;
};

/// Columns of `access` for the three selected iterators, in selection order.
IntMatrix restrict_access(const TensorAccess& access, std::span<const std::size_t, 3> selected);

ReuseSpace reuse_space(const IntMatrix& restricted_access, const SttMatrix& t);

/// Builds the canonical ReuseSpace spanned by arbitrary nonzero rational
/// vectors (linearly independent or not).
ReuseSpace canonical_reuse_space(const std::vector<std::vector<Rational>>& spanning);

enum class DataflowKind { Unicast, Stationary, Systolic, Multicast, ReductionTree, Reuse2D };
enum class Reuse2DKind { None, Broadcast, MulticastStationary, SystolicMulticast };
enum class IoRole { Input, Output };

struct TensorDataflow {
  DataflowKind kind = DataflowKind::Unicast;
  Reuse2DKind sub_kind = Reuse2DKind::None;
  std::vector<Vec3> direction;
  IoRole io_role = IoRole::Input;
  /// Set for a 3-D reuse space (tensor constant over the selected loops),
  /// reported as a broadcast.
  bool degenerate = false;

  bool operator==(const TensorDataflow&) const = default;
};

TensorDataflow classify_dataflow(const ReuseSpace& reuse, IoRole role);

/// S, T, M, U or B.
char dataflow_letter(const TensorDataflow& df);

std::string to_string(DataflowKind kind);
std::string to_string(Reuse2DKind kind);
std::string to_string(IoRole role);
DataflowKind dataflow_kind_from_string(const std::string& s);
Reuse2DKind reuse2d_kind_from_string(const std::string& s);

/// Basis of ker(A) over the integers (unimodular column reduction).
std::vector<std::vector<std::int64_t>> integer_kernel(const IntMatrix& a);

/// The reuse lattice realized by hardware: space-time displacements between
/// integer iterations touching the same element. `steps` mirror the
/// ReuseSpace basis layout but are lattice vectors of T*ker_Z(A), so with
/// |det T| > 1 they may be multiples of the primitive directions.
/// `iteration_steps[i]` is the iteration-space vector with T*u == steps[i].
struct ReuseLattice {
  int dimension = 0;
  std::vector<Vec3> steps;
  std::vector<Vec3> iteration_steps;
};

ReuseLattice reuse_lattice(const IntMatrix& restricted_access, const SttMatrix& t);

/// Per-tensor analysis of one (algebra, T) pair.
struct TensorAnalysis {
  std::string tensor;
  IoRole role = IoRole::Input;
  IntMatrix restricted_access;
  ReuseSpace reuse;
  TensorDataflow dataflow;
  ReuseLattice lattice;
};

struct DataflowAnalysis {
  SttMatrix stt;
  LegalityVerdict verdict;
  std::vector<TensorAnalysis> tensors;  // inputs in order, then the output
  std::string name;                      // e.g. "MNK-SST"
};

/// Throws std::invalid_argument on a bad selection or singular T.
DataflowAnalysis analyze_dataflow(const TensorAlgebra& algebra, const SttMatrix& t);

/// Upper-cased selected iterator names, a dash, then one letter per tensor.
std::string dataflow_name(const TensorAlgebra& algebra, const SttMatrix& t, std::span<const TensorDataflow> flows);

}  // namespace stgen
