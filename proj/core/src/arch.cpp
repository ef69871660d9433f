#include "stgen/arch.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace stgen {

char module_letter(PeModuleKind kind) { return static_cast<char>('a' + static_cast<int>(kind)); }

PeModuleKind module_from_letter(char letter) {
  if (letter < 'a' || letter > 'f') throw std::invalid_argument(std::string("unknown PE module letter '") + letter + "'");
  return static_cast<PeModuleKind>(letter - 'a');
}

std::string to_string(PeModuleKind kind) {
  switch (kind) {
    case PeModuleKind::SystolicIn: return "SystolicIn";
    case PeModuleKind::SystolicOut: return "SystolicOut";
    case PeModuleKind::StationaryIn: return "StationaryIn";
    case PeModuleKind::StationaryOut: return "StationaryOut";
    case PeModuleKind::PassIn: return "PassIn";
    case PeModuleKind::PassOut: return "PassOut";
  }
  return "?";
}

std::string to_string(BankRole role) {
  switch (role) {
    case BankRole::Inject: return "inject";
    case BankRole::Drain: return "drain";
    case BankRole::Multicast: return "multicast";
    case BankRole::Broadcast: return "broadcast";
    case BankRole::Unicast: return "unicast";
    case BankRole::StationaryLoad: return "stationary-load";
    case BankRole::StationaryDrain: return "stationary-drain";
    case BankRole::TreeRoot: return "tree-root";
  }
  return "?";
}

BankRole bank_role_from_string(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(BankRole::TreeRoot); ++i)
    if (to_string(static_cast<BankRole>(i)) == s) return static_cast<BankRole>(i);
  throw std::invalid_argument("unknown bank role '" + s + "'");
}

std::vector<PeModuleKind> select_pe_module(const TensorDataflow& df) {
  const bool in = df.io_role == IoRole::Input;
  using K = PeModuleKind;
  switch (df.kind) {
    case DataflowKind::Systolic: return {in ? K::SystolicIn : K::SystolicOut};
    case DataflowKind::Stationary: return {in ? K::StationaryIn : K::StationaryOut};
    case DataflowKind::Unicast: return {in ? K::PassIn : K::PassOut};
    case DataflowKind::Multicast:
      if (!in) throw ContractViolation("multicast dataflow cannot drive an output tensor");
      return {K::PassIn};
    case DataflowKind::ReductionTree:
      if (in) throw ContractViolation("reduction-tree dataflow cannot feed an input tensor");
      return {K::PassOut};
    case DataflowKind::Reuse2D:
      switch (df.sub_kind) {
        case Reuse2DKind::MulticastStationary: return in ? std::vector{K::PassIn, K::StationaryIn} : std::vector{K::PassOut, K::StationaryOut};
        case Reuse2DKind::SystolicMulticast: return in ? std::vector{K::PassIn, K::SystolicIn} : std::vector{K::PassOut, K::SystolicOut};
        case Reuse2DKind::Broadcast:
        case Reuse2DKind::None: return {in ? K::PassIn : K::PassOut};
      }
  }
  throw ContractViolation("unclassified dataflow");
}

const TensorPlan& ArchSpec::tensor(const std::string& name) const {
  for (const auto& t : pe_modules)
    if (t.tensor == name) return t;
  throw std::out_of_range("no tensor '" + name + "' in architecture");
}

namespace {

bool adjacent(const Vec3& v) { return std::llabs(v[0]) <= 1 && std::llabs(v[1]) <= 1 && (v[0] != 0 || v[1] != 0); }

std::array<std::int64_t, 3> mul3(const IntMatrix& m, const std::array<std::int64_t, 3>& x) {
  std::array<std::int64_t, 3> r{};
  for (std::size_t i = 0; i < 3; ++i) r[i] = m(i, 0) * x[0] + m(i, 1) * x[1] + m(i, 2) * x[2];
  return r;
}

bool in_box(const std::array<std::int64_t, 3>& x, const std::array<std::int64_t, 3>& box) {
  for (std::size_t j = 0; j < 3; ++j)
    if (x[j] < 0 || x[j] >= box[j]) return false;
  return true;
}

template <typename F>
void for_box(const std::array<std::int64_t, 3>& box, F&& f) {
  std::array<std::int64_t, 3> x{};
  for (x[0] = 0; x[0] < box[0]; ++x[0])
    for (x[1] = 0; x[1] < box[1]; ++x[1])
      for (x[2] = 0; x[2] < box[2]; ++x[2]) f(x);
}

std::int64_t ceil_log2(std::int64_t n) {
  std::int64_t d = 0;
  while ((std::int64_t{1} << d) < n) ++d;
  return d;
}

bool is_broadcast(const TensorPlan& t) {
  return t.dataflow.kind == DataflowKind::Reuse2D && t.dataflow.sub_kind == Reuse2DKind::Broadcast;
}

/// Step that carries data between cycles (systolic chain), if any.
std::optional<std::size_t> chain_step(const TensorPlan& t) {
  if (t.dataflow.kind == DataflowKind::Systolic) return 0;
  if (t.dataflow.kind == DataflowKind::Reuse2D && t.dataflow.sub_kind == Reuse2DKind::SystolicMulticast) return 1;
  return std::nullopt;
}

/// Step along which one cycle's PEs share an element (lines), if any.
std::optional<std::size_t> line_step(const TensorPlan& t) {
  if (t.dataflow.kind == DataflowKind::Multicast || t.dataflow.kind == DataflowKind::ReductionTree) return 0;
  if (t.dataflow.kind == DataflowKind::Reuse2D &&
      (t.dataflow.sub_kind == Reuse2DKind::SystolicMulticast || t.dataflow.sub_kind == Reuse2DKind::MulticastStationary))
    return 0;
  return std::nullopt;
}

std::vector<std::vector<PeCoord>> lines_along(const ReplicaGeometry& g, const Vec3& d) {
  std::vector<std::vector<PeCoord>> lines;
  for (std::int64_t r = 0; r < g.extent[0]; ++r)
    for (std::int64_t c = 0; c < g.extent[1]; ++c) {
      const PeCoord p{r, c};
      if (!g.is_active(p) || g.is_active({r - d[0], c - d[1]})) continue;
      std::vector<PeCoord> line;
      for (PeCoord q = p; g.is_active(q); q = {q.row + d[0], q.col + d[1]}) line.push_back(q);
      lines.push_back(std::move(line));
    }
  return lines;
}

std::vector<PeCoord> active_pes(const ReplicaGeometry& g) {
  std::vector<PeCoord> out;
  for (std::int64_t r = 0; r < g.extent[0]; ++r)
    for (std::int64_t c = 0; c < g.extent[1]; ++c)
      if (g.is_active({r, c})) out.push_back({r, c});
  return out;
}

}  // namespace

std::vector<Vec3> required_adjacent_steps(const TensorDataflow& df, const ReuseLattice& lattice) {
  std::vector<Vec3> steps;
  switch (df.kind) {
    case DataflowKind::Systolic:
    case DataflowKind::Multicast:
    case DataflowKind::ReductionTree:
      steps.push_back(lattice.steps.at(0));
      break;
    case DataflowKind::Reuse2D:
      if (df.sub_kind == Reuse2DKind::SystolicMulticast) steps = {lattice.steps.at(0), lattice.steps.at(1)};
      if (df.sub_kind == Reuse2DKind::MulticastStationary) steps = {lattice.steps.at(0)};
      break;
    default:
      break;
  }
  return steps;
}

void check_adjacency(const DataflowAnalysis& analysis) {
  for (const auto& t : analysis.tensors)
    for (const auto& s : required_adjacent_steps(t.dataflow, t.lattice))
      if (!adjacent(s))
        throw UnsupportedDesign("tensor " + t.tensor + " needs a link along " + to_string(s) +
                                ", which joins non-adjacent PEs");
}

bool ReplicaGeometry::is_active(PeCoord p) const {
  if (p.row < 0 || p.col < 0 || p.row >= extent[0] || p.col >= extent[1]) return false;
  return active[static_cast<std::size_t>(p.row * extent[1] + p.col)];
}

std::int64_t ReplicaGeometry::active_count() const { return std::count(active.begin(), active.end(), true); }

ReplicaGeometry ReplicaGeometry::full(std::array<std::int64_t, 2> extent) {
  ReplicaGeometry g;
  g.extent = extent;
  g.active.assign(static_cast<std::size_t>(extent[0] * extent[1]), true);
  return g;
}

std::vector<std::array<std::int64_t, 3>> stage_shapes(const TilePlan& plan, const TensorAlgebra& algebra) {
  std::array<std::vector<std::int64_t>, 3> sizes;
  for (std::size_t j = 0; j < 3; ++j) {
    sizes[j].push_back(plan.tile[j]);
    const std::int64_t rem = algebra.iterators[plan.selected[j]].bound % plan.tile[j];
    if (rem != 0) sizes[j].push_back(rem);
  }
  std::vector<std::array<std::int64_t, 3>> shapes;
  for (auto a : sizes[0])
    for (auto b : sizes[1])
      for (auto c : sizes[2]) shapes.push_back({a, b, c});
  return shapes;
}

namespace {

ReplicaGeometry geometry_of(const IntMatrix& T, const std::array<std::int64_t, 3>& origin,
                            std::array<std::int64_t, 2> extent, std::vector<std::array<std::int64_t, 3>> shapes) {
  ReplicaGeometry g;
  g.extent = extent;
  g.shapes = std::move(shapes);
  g.active.assign(static_cast<std::size_t>(extent[0] * extent[1]), false);
  for (const auto& box : g.shapes)
    for_box(box, [&](const std::array<std::int64_t, 3>& x) {
      const auto st = mul3(T, x);
      const std::int64_t r = st[0] + origin[0], c = st[1] + origin[1];
      g.active[static_cast<std::size_t>(r * extent[1] + c)] = true;
    });
  return g;
}

}  // namespace

ReplicaGeometry replica_geometry(const TilePlan& plan, const SttMatrix& t, const TensorAlgebra& algebra) {
  return geometry_of(t.entries, plan.origin, plan.extent, stage_shapes(plan, algebra));
}

Interconnect build_interconnect(const std::vector<TensorPlan>& tensors, const ReplicaGeometry& g) {
  Interconnect net;
  for (const auto& t : tensors) {
    for (const auto& s : required_adjacent_steps(t.dataflow, t.lattice))
      if (!adjacent(s))
        throw UnsupportedDesign("tensor " + t.tensor + " needs a link along " + to_string(s) +
                                ", which joins non-adjacent PEs");

    if (auto k = chain_step(t)) {
      const Vec3 s = t.lattice.steps[*k];
      for (const auto& p : active_pes(g)) {
        const PeCoord q{p.row + s[0], p.col + s[1]};
        if (g.is_active(q)) net.links.push_back({t.tensor, p, q, s[2]});
      }
    }

    const bool in = t.role == IoRole::Input;
    if (auto k = line_step(t)) {
      const Vec3 d = t.lattice.steps[*k];
      const bool diagonal = d[0] != 0 && d[1] != 0;
      for (auto& line : lines_along(g, d)) {
        if (in) {
          net.multicast_groups.push_back({t.tensor, -1, 0, std::move(line), diagonal});
        } else {
          const auto n = static_cast<std::int64_t>(line.size());
          net.reduction_trees.push_back({t.tensor, -1, 0, std::move(line), 2, ceil_log2(n)});
        }
      }
    } else if (is_broadcast(t)) {
      auto all = active_pes(g);
      if (in) {
        net.multicast_groups.push_back({t.tensor, -1, 0, std::move(all), false});
      } else {
        const auto n = static_cast<std::int64_t>(all.size());
        net.reduction_trees.push_back({t.tensor, -1, 0, std::move(all), 2, ceil_log2(n)});
      }
    }
  }
  return net;
}

std::vector<BankDescriptor> assign_banks(const std::vector<TensorPlan>& tensors, const SttMatrix& stt,
                                         const TilePlan& plan, const ReplicaGeometry& g, Interconnect& net) {
  const IntMatrix& T = stt.entries;
  const IntMatrix adj = adjugate3(T);
  const auto det = static_cast<std::int64_t>(determinant(T));
  std::vector<BankDescriptor> banks;

  for (const auto& t : tensors) {
    AddressStream stream;
    const IntMatrix sel = t.access.select_columns(plan.selected);
    stream.space_time = sel * adj;
    stream.denominator = det;
    stream.origin = plan.origin;
    stream.sequential = t.access;
    stream.offsets = t.offsets;

    auto add = [&](BankRole role, std::vector<PeCoord> pes) {
      BankDescriptor b;
      b.tensor = t.tensor;
      b.id = static_cast<std::int64_t>(banks.size());
      b.role = role;
      b.pes = std::move(pes);
      b.stream = stream;
      banks.push_back(std::move(b));
      return banks.back().id;
    };

    const bool in = t.role == IoRole::Input;
    const auto& df = t.dataflow;

    if (df.kind == DataflowKind::Systolic) {
      // Chain heads (inputs) or tails (outputs) over every stage shape.
      const Vec3 u = t.lattice.iteration_steps[0];
      std::set<PeCoord> ends;
      for (const auto& box : g.shapes)
        for_box(box, [&](const std::array<std::int64_t, 3>& x) {
          const std::int64_t sgn = in ? -1 : 1;
          const std::array<std::int64_t, 3> nb{x[0] + sgn * u[0], x[1] + sgn * u[1], x[2] + sgn * u[2]};
          if (in_box(nb, box)) return;
          const auto st = mul3(T, x);
          ends.insert({st[0] + plan.origin[0], st[1] + plan.origin[1]});
        });
      for (const auto& p : ends) add(in ? BankRole::Inject : BankRole::Drain, {p});
      continue;
    }

    if (line_step(t) || is_broadcast(t)) {
      BankRole role = in ? BankRole::Multicast : BankRole::TreeRoot;
      if (is_broadcast(t) && in) role = BankRole::Broadcast;
      if (df.kind == DataflowKind::Reuse2D && df.sub_kind == Reuse2DKind::MulticastStationary && in)
        role = BankRole::StationaryLoad;
      if (in) {
        for (auto& grp : net.multicast_groups)
          if (grp.tensor == t.tensor) grp.bank = add(role, grp.members);
      } else {
        for (auto& tree : net.reduction_trees)
          if (tree.tensor == t.tensor) tree.bank = add(role, tree.members);
      }
      continue;
    }

    BankRole role = BankRole::Unicast;
    if (df.kind == DataflowKind::Stationary) role = in ? BankRole::StationaryLoad : BankRole::StationaryDrain;
    for (const auto& p : active_pes(g)) add(role, {p});
  }
  return banks;
}

StageSchedule build_controller(const TilePlan& plan, const SttMatrix& stt, const std::vector<TensorPlan>& tensors,
                               const Interconnect& net, const ReplicaGeometry& g) {
  StageSchedule s;
  const IntMatrix& T = stt.entries;
  s.selection = stt.selected_iterators;
  s.stt = T;
  s.adjugate = adjugate3(T);
  s.determinant = static_cast<std::int64_t>(determinant(T));
  s.origin = plan.origin;
  s.tile = plan.tile;
  s.extent = plan.extent;
  s.time_extent = plan.time_extent;
  s.nest = plan.nest;
  s.stage_count = plan.stage_count;
  s.replicas = plan.replicas;
  for (std::int64_t r = 0; r < plan.replicas; ++r)
    s.replica_origins.push_back({(r / plan.replica_grid[1]) * plan.extent[0], (r % plan.replica_grid[1]) * plan.extent[1]});
  s.occupied_pes = g.active_count();

  std::map<PeCoord, std::int64_t> macs;
  for_box(plan.tile, [&](const std::array<std::int64_t, 3>& x) {
    const auto st = mul3(T, x);
    ++macs[{st[0], st[1]}];
  });
  s.compute_cycles_per_stage = 0;
  for (const auto& [pe, n] : macs) s.compute_cycles_per_stage = std::max(s.compute_cycles_per_stage, n);

  // Streaming trees add their depth once per stage; stationary outputs
  // reduced at the boundary do not.
  s.drain_latency = 0;
  for (const auto& tree : net.reduction_trees) {
    const auto& tp = *std::find_if(tensors.begin(), tensors.end(), [&](const TensorPlan& t) { return t.tensor == tree.tensor; });
    const bool boundary_reduced =
        tp.dataflow.kind == DataflowKind::Reuse2D && tp.dataflow.sub_kind == Reuse2DKind::MulticastStationary;
    if (!boundary_reduced) s.drain_latency = std::max(s.drain_latency, tree.depth);
  }
  s.cycles_per_stage = s.time_extent + s.drain_latency;
  s.fill_drain_cycles = s.cycles_per_stage - s.compute_cycles_per_stage;

  for (const auto& t : tensors) {
    const bool stationary_in = std::ranges::count(t.modules, PeModuleKind::StationaryIn) > 0;
    const bool stationary_out = std::ranges::count(t.modules, PeModuleKind::StationaryOut) > 0;
    if (stationary_in) {
      s.events.push_back({"load", t.tensor, "before-first-stage", 1, false});
      if (s.stage_count > 1) s.events.push_back({"swap", t.tensor, "stage-boundary", 1, true});
    }
    if (stationary_out) {
      if (s.stage_count > 1) s.events.push_back({"swap", t.tensor, "stage-boundary", 1, true});
      s.events.push_back({"drain", t.tensor, "after-last-stage", 1, false});
    }
  }
  return s;
}

ArchSpec generate_arch(const TensorAlgebra& algebra, const SttMatrix& t, const GenerateOptions& options) {
  const DataflowAnalysis analysis = analyze_dataflow(algebra, t);
  check_adjacency(analysis);
  const TilePlan plan = select_loops_and_tile(algebra, t, options.tiling);

  ArchSpec arch;
  arch.array = options.tiling.array;
  const auto accesses = algebra.tensors();
  for (std::size_t i = 0; i < analysis.tensors.size(); ++i) {
    const auto& ta = analysis.tensors[i];
    TensorPlan tp;
    tp.tensor = ta.tensor;
    tp.role = ta.role;
    tp.dataflow = ta.dataflow;
    tp.modules = select_pe_module(ta.dataflow);
    tp.lattice = ta.lattice;
    tp.access = accesses[i]->access;
    tp.offsets = accesses[i]->offsets;
    tp.extents = algebra.extents(*accesses[i]);
    arch.pe_modules.push_back(std::move(tp));
  }

  const ReplicaGeometry g = replica_geometry(plan, t, algebra);
  Interconnect net = build_interconnect(arch.pe_modules, g);
  const auto banks = assign_banks(arch.pe_modules, t, plan, g, net);
  arch.stages = build_controller(plan, t, arch.pe_modules, net, g);

  const auto per_replica = static_cast<std::int64_t>(banks.size());
  for (std::int64_t r = 0; r < plan.replicas; ++r) {
    const PeCoord o = arch.stages.replica_origins[static_cast<std::size_t>(r)];
    auto shift = [&](PeCoord p) { return PeCoord{p.row + o.row, p.col + o.col}; };
    auto shift_all = [&](std::vector<PeCoord> v) {
      for (auto& p : v) p = shift(p);
      return v;
    };
    for (const auto& l : net.links) arch.links.push_back({l.tensor, shift(l.src), shift(l.dst), l.delay});
    for (const auto& grp : net.multicast_groups)
      arch.multicast_groups.push_back({grp.tensor, grp.bank + r * per_replica, r, shift_all(grp.members), grp.diagonal});
    for (const auto& tree : net.reduction_trees)
      arch.reduction_trees.push_back({tree.tensor, tree.bank + r * per_replica, r, shift_all(tree.members), tree.arity, tree.depth});
    for (const auto& b : banks) {
      BankDescriptor nb = b;
      nb.id = b.id + r * per_replica;
      nb.replica = r;
      nb.pes = shift_all(b.pes);
      arch.banks.push_back(std::move(nb));
    }
  }

  arch.compute_cell.operands = static_cast<std::int64_t>(algebra.inputs.size());
  arch.compute_cell.accumulate = true;
  arch.compute_cell.statement = to_string(algebra);
  return arch;
}

std::optional<std::array<std::int64_t, 3>> active_iteration(const StageSchedule& s, PeCoord local, std::int64_t t,
                                                            const std::array<std::int64_t, 3>& box) {
  const std::array<std::int64_t, 3> v{local.row - s.origin[0], local.col - s.origin[1], t - s.origin[2]};
  const auto num = mul3(s.adjugate, v);
  std::array<std::int64_t, 3> x{};
  for (std::size_t j = 0; j < 3; ++j) {
    if (num[j] % s.determinant != 0) return std::nullopt;
    x[j] = num[j] / s.determinant;
  }
  if (!in_box(x, box)) return std::nullopt;
  return x;
}

std::pair<std::int64_t, std::int64_t> active_cycle_range(const StageSchedule& s, const std::array<std::int64_t, 3>& box) {
  std::int64_t lo = 0, hi = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    const std::int64_t c = s.stt(2, j) * (box[j] - 1);
    lo += std::min<std::int64_t>(0, c);
    hi += std::max<std::int64_t>(0, c);
  }
  return {lo + s.origin[2], hi + s.origin[2]};
}

std::vector<std::array<std::int64_t, 3>> schedule_shapes(const StageSchedule& s) {
  std::array<std::vector<std::int64_t>, 3> sizes;
  for (std::size_t j = 0; j < 3; ++j) {
    sizes[j].push_back(s.tile[j]);
    for (const auto& loop : s.nest)
      if (loop.name == s.selection[j] && loop.bound % s.tile[j] != 0) sizes[j].push_back(loop.bound % s.tile[j]);
  }
  std::vector<std::array<std::int64_t, 3>> shapes;
  for (auto a : sizes[0])
    for (auto b : sizes[1])
      for (auto c : sizes[2]) shapes.push_back({a, b, c});
  return shapes;
}

ReplicaGeometry schedule_geometry(const StageSchedule& s) {
  return geometry_of(s.stt, s.origin, s.extent, schedule_shapes(s));
}

namespace {

std::string pe_str(PeCoord p) { return "PE(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")"; }

}  // namespace

std::string check_port_driving(const ArchSpec& arch) {
  const StageSchedule& s = arch.stages;
  const auto shapes = schedule_shapes(s);
  for (const auto& t : arch.pe_modules) {
    std::map<PeCoord, std::vector<const Link*>> links_in;
    std::map<PeCoord, std::int64_t> groups, trees;
    std::map<PeCoord, std::int64_t> bank_ports;
    for (const auto& l : arch.links)
      if (l.tensor == t.tensor) links_in[l.dst].push_back(&l);
    for (const auto& grp : arch.multicast_groups)
      if (grp.tensor == t.tensor)
        for (const auto& p : grp.members) ++groups[p];
    for (const auto& tree : arch.reduction_trees)
      if (tree.tensor == t.tensor)
        for (const auto& p : tree.members) ++trees[p];
    for (const auto& b : arch.banks)
      if (b.tensor == t.tensor && b.pes.size() == 1 &&
          (b.role == BankRole::Inject || b.role == BankRole::Drain || b.role == BankRole::Unicast ||
           b.role == BankRole::StationaryLoad || b.role == BankRole::StationaryDrain))
        ++bank_ports[b.pes[0]];

    const auto chain = chain_step(t);
    const bool grouped = line_step(t).has_value() || is_broadcast(t);
    const bool in = t.role == IoRole::Input;

    for (std::size_t r = 0; r < s.replica_origins.size(); ++r) {
      const PeCoord o = s.replica_origins[r];
      for (const auto& box : shapes) {
        const auto [lo, hi] = active_cycle_range(s, box);
        for (std::int64_t cyc = lo; cyc <= hi; ++cyc)
          for (std::int64_t pr = 0; pr < s.extent[0]; ++pr)
            for (std::int64_t pc = 0; pc < s.extent[1]; ++pc) {
              const PeCoord local{pr, pc};
              const auto x = active_iteration(s, local, cyc, box);
              if (!x) continue;
              const PeCoord pe{pr + o.row, pc + o.col};
              std::int64_t producers = 0;
              if (chain) {
                // Link producer: predecessor active one step earlier.
                const Vec3 step = t.lattice.steps[*chain];
                const Vec3 u = t.lattice.iteration_steps[*chain];
                const std::array<std::int64_t, 3> prev{(*x)[0] - u[0], (*x)[1] - u[1], (*x)[2] - u[2]};
                const bool head = !in_box(prev, box);
                for (const Link* l : links_in[pe])
                  if (!head && l->src == PeCoord{pe.row - step[0], pe.col - step[1]} && l->delay == step[2]) ++producers;
                if (head) {
                  if (grouped) producers += in ? groups[pe] : 1;
                  else producers += in ? bank_ports[pe] : 1;  // output chains start from a zero constant
                }
              } else if (grouped) {
                producers = in ? groups[pe] : trees[pe];
              } else {
                producers = bank_ports[pe];
              }
              if (producers != 1) {
                std::ostringstream os;
                os << "tensor " << t.tensor << " port of " << pe_str(pe) << " at cycle " << cyc << " has " << producers
                   << " producers";
                return os.str();
              }
            }
      }
    }
  }
  return {};
}

std::string check_delay_consistency(const ArchSpec& arch) {
  for (const auto& t : arch.pe_modules) {
    const auto chain = chain_step(t);
    for (const auto& l : arch.links) {
      if (l.tensor != t.tensor) continue;
      if (!chain) return "tensor " + t.tensor + " has links but no systolic dataflow";
      const Vec3 step = t.lattice.steps[*chain];
      if (l.dst.row - l.src.row != step[0] || l.dst.col - l.src.col != step[1] || l.delay != step[2])
        return "link " + pe_str(l.src) + "->" + pe_str(l.dst) + " of tensor " + t.tensor + " does not follow step " +
               to_string(step);
    }
  }
  return {};
}

std::string check_tree_partition(const ArchSpec& arch) {
  const ReplicaGeometry g = schedule_geometry(arch.stages);
  for (const auto& t : arch.pe_modules) {
    if (t.role != IoRole::Output || !(line_step(t) || is_broadcast(t))) continue;
    std::map<PeCoord, int> seen;
    for (const auto& tree : arch.reduction_trees)
      if (tree.tensor == t.tensor)
        for (const auto& p : tree.members)
          if (++seen[p] > 1) return "tensor " + t.tensor + ": " + pe_str(p) + " is a leaf of two trees";
    for (const auto& o : arch.stages.replica_origins)
      for (const auto& p : active_pes(g)) {
        const PeCoord q{p.row + o.row, p.col + o.col};
        if (!seen.count(q)) return "tensor " + t.tensor + ": " + pe_str(q) + " is not covered by any tree";
        seen.erase(q);
      }
    if (!seen.empty()) return "tensor " + t.tensor + ": tree leaf " + pe_str(seen.begin()->first) + " is never active";
  }
  return {};
}

}  // namespace stgen
