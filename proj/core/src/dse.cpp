#include "stgen/dse.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "stgen/reference.hpp"
#include "stgen/sim.hpp"

namespace stgen {

std::string dataflow_signature(const DesignPoint& p) {
  std::string s = p.selection[0] + "," + p.selection[1] + "," + p.selection[2] + "|";
  for (const auto& df : p.dataflows) {
    s += to_string(df.kind);
    if (df.kind == DataflowKind::Reuse2D) s += ":" + to_string(df.sub_kind);
    for (const auto& v : df.direction) s += to_string(v);
    s += ";";
  }
  return s;
}

std::string family_code(const DesignPoint& p) {
  std::string s;
  for (const auto& df : p.dataflows) s += dataflow_letter(df);
  return s;
}

std::vector<IntMatrix> full_rank_matrices(const std::vector<std::int64_t>& alphabet) {
  std::vector<IntMatrix> out;
  const std::size_t a = alphabet.size();
  if (a == 0) return out;
  std::size_t total = 1;
  for (int i = 0; i < 9; ++i) total *= a;
  std::array<std::size_t, 9> digit{};
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t v = n;
    for (int i = 8; i >= 0; --i) {
      digit[static_cast<std::size_t>(i)] = v % a;
      v /= a;
    }
    IntMatrix m(3, 3);
    for (std::size_t i = 0; i < 9; ++i) m(i / 3, i % 3) = alphabet[digit[i]];
    const std::int64_t det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    if (det != 0) out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::array<std::string, 3>> ordered_selections(const TensorAlgebra& algebra) {
  std::vector<std::array<std::string, 3>> out;
  const std::size_t n = algebra.num_iterators();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c)
        if (a != b && b != c && a != c)
          out.push_back({algebra.iterators[a].name, algebra.iterators[b].name, algebra.iterators[c].name});
  return out;
}

TilingOptions tiling_for(const EnumerateOptions& options, const TensorAlgebra&, const std::array<std::size_t, 3>&) {
  TilingOptions t;
  t.array = options.array;
  t.time_budget = options.time_budget;
  return t;
}

namespace {

/// Classifies one (selection, T) pair; nullopt when illegal.
std::optional<DesignPoint> classify_point(const TensorAlgebra& algebra, const std::array<std::string, 3>& selection,
                                          const std::array<std::size_t, 3>& sel, const std::vector<IntMatrix>& restricted,
                                          const IntMatrix& T, const IntMatrix& adj, const EnumerateOptions& options) {
  DesignPoint p;
  p.algebra = algebra.name;
  p.selection = selection;
  p.stt = T;
  const SttMatrix stt{T, selection};
  const auto accesses = algebra.tensors();
  for (std::size_t k = 0; k < restricted.size(); ++k) {
    const IoRole role = accesses[k] == &algebra.output ? IoRole::Output : IoRole::Input;
    // ker(A T^-1) == ker(A adj(T)); the integer kernel spans the same space.
    std::vector<std::vector<Rational>> span;
    for (const auto& v : integer_kernel(restricted[k] * adj)) span.push_back({Rational(v[0]), Rational(v[1]), Rational(v[2])});
    const ReuseSpace rs = canonical_reuse_space(span);
    const TensorDataflow df = classify_dataflow(rs, role);
    const bool needs_steps = rs.dimension == 1 || rs.dimension == 2;
    if (needs_steps) {
      const ReuseLattice lat = reuse_lattice(restricted[k], stt);
      for (const auto& s : required_adjacent_steps(df, lat))
        if (std::llabs(s[0]) > 1 || std::llabs(s[1]) > 1 || (s[0] == 0 && s[1] == 0)) return std::nullopt;
    }
    p.dataflows.push_back(df);
  }
  p.name = dataflow_name(algebra, stt, p.dataflows);
  const TilePlan plan = select_loops_and_tile(algebra, stt, tiling_for(options, algebra, sel));
  p.tile = plan.tile;
  return p;
}

template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<DesignPoint> enumerate_designs(const TensorAlgebra& algebra, const EnumerateOptions& options) {
  const auto matrices = full_rank_matrices(options.alphabet);
  std::vector<IntMatrix> adjugates;
  for (const auto& m : matrices) adjugates.push_back(adjugate3(m));

  std::vector<DesignPoint> out;
  std::set<std::string> seen;
  for (const auto& selection : ordered_selections(algebra)) {
    const SttMatrix probe{IntMatrix::identity(3), selection};
    const auto sel = resolve_selection(algebra, probe);
    std::vector<IntMatrix> restricted;
    for (const auto* acc : algebra.tensors()) restricted.push_back(restrict_access(*acc, sel));

    std::vector<std::optional<DesignPoint>> found(matrices.size());
    parallel_for(matrices.size(), options.workers, [&](std::size_t i) {
      found[i] = classify_point(algebra, selection, sel, restricted, matrices[i], adjugates[i], options);
    });
    for (auto& f : found)
      if (f && seen.insert(dataflow_signature(*f)).second) out.push_back(std::move(*f));
  }
  return out;
}

ArchSpec build_point(const TensorAlgebra& algebra, const DesignPoint& point, ArrayDims array) {
  GenerateOptions g;
  g.tiling.array = array;
  g.tiling.fixed_tile = point.tile;
  return generate_arch(algebra, point.stt_matrix(), g);
}

namespace {

using Box = std::array<std::int64_t, 3>;

/// Streaming view of one tensor: how its values enter or leave the array.
struct TensorFlow {
  bool input = true;
  bool chain = false;
  bool stationary = false;
  Vec3 u{};  // chain step in the iteration space
  std::map<PeCoord, std::int64_t> group;
};

std::vector<TensorFlow> tensor_flows(const ArchSpec& arch) {
  std::vector<TensorFlow> out;
  for (const auto& t : arch.pe_modules) {
    TensorFlow f;
    const auto& df = t.dataflow;
    f.input = t.role == IoRole::Input;
    f.chain = df.kind == DataflowKind::Systolic ||
              (df.kind == DataflowKind::Reuse2D && df.sub_kind == Reuse2DKind::SystolicMulticast);
    f.stationary = df.kind == DataflowKind::Stationary ||
                   (df.kind == DataflowKind::Reuse2D && df.sub_kind == Reuse2DKind::MulticastStationary);
    if (f.chain) f.u = t.lattice.iteration_steps[df.kind == DataflowKind::Systolic ? 0 : 1];
    std::int64_t gid = 0;
    for (const auto& g : arch.multicast_groups)
      if (g.tensor == t.tensor && g.replica == 0) {
        for (const auto& p : g.members) f.group[p] = gid;
        ++gid;
      }
    for (const auto& g : arch.reduction_trees)
      if (g.tensor == t.tensor && g.replica == 0) {
        for (const auto& p : g.members) f.group[p] = gid;
        ++gid;
      }
    out.push_back(std::move(f));
  }
  return out;
}

bool inside(const Box& v, const Box& shape) {
  for (std::size_t j = 0; j < 3; ++j)
    if (v[j] < 0 || v[j] >= shape[j]) return false;
  return true;
}

/// Per-tensor bank transfers of one replica in every cycle of a stage.
std::vector<std::map<std::int64_t, std::int64_t>> stage_demand(const StageSchedule& s,
                                                               const std::vector<TensorFlow>& flows, const Box& shape) {
  std::vector<std::map<std::int64_t, std::int64_t>> demand(flows.size());
  std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> group_cycles(flows.size());
  const PeCoord base = s.replica_origins.empty() ? PeCoord{0, 0} : s.replica_origins[0];
  Box x{};
  for (x[0] = 0; x[0] < shape[0]; ++x[0])
    for (x[1] = 0; x[1] < shape[1]; ++x[1])
      for (x[2] = 0; x[2] < shape[2]; ++x[2]) {
        Box st{};
        for (std::size_t i = 0; i < 3; ++i) st[i] = s.stt(i, 0) * x[0] + s.stt(i, 1) * x[1] + s.stt(i, 2) * x[2] + s.origin[i];
        const PeCoord pe{st[0] + base.row, st[1] + base.col};
        const std::int64_t cyc = st[2];
        for (std::size_t k = 0; k < flows.size(); ++k) {
          const auto& f = flows[k];
          if (f.stationary) continue;
          bool to_bank = true;
          if (f.chain) {
            const std::int64_t sg = f.input ? -1 : 1;
            to_bank = !inside({x[0] + sg * f.u[0], x[1] + sg * f.u[1], x[2] + sg * f.u[2]}, shape);
          }
          if (!to_bank) continue;
          const auto g = f.group.find(pe);
          if (g != f.group.end()) {
            if (group_cycles[k].insert({g->second, cyc}).second) ++demand[k][cyc];
          } else {
            ++demand[k][cyc];
          }
        }
      }
  return demand;
}

/// Number of stages executing each shape of `schedule_shapes`.
std::vector<std::int64_t> shape_counts(const StageSchedule& s, const std::vector<Box>& shapes) {
  std::array<std::int64_t, 3> bound = s.tile;
  for (std::size_t j = 0; j < 3; ++j)
    for (const auto& loop : s.nest)
      if (loop.name == s.selection[j]) bound[j] = loop.bound;
  std::int64_t tiles = 1;
  for (std::size_t j = 0; j < 3; ++j) tiles *= (bound[j] + s.tile[j] - 1) / s.tile[j];
  const std::int64_t outer = s.stage_count / tiles;
  std::vector<std::int64_t> counts;
  for (const auto& shape : shapes) {
    std::int64_t n = outer;
    for (std::size_t j = 0; j < 3; ++j) n *= shape[j] == s.tile[j] ? bound[j] / s.tile[j] : 1;
    counts.push_back(n);
  }
  return counts;
}

}  // namespace

CostReport estimate_cost(const ArchSpec& arch, std::int64_t cap, const CostWeights& w) {
  CostReport r;
  const auto& s = arch.stages;
  const std::int64_t replicas = s.replicas;
  r.utilization = static_cast<double>(arch.occupied_pes()) / static_cast<double>(arch.array.pes());
  const auto flows = tensor_flows(arch);

  // Cycles: every stage shape walked once, each cycle stretched to fit the cap.
  const auto shapes = schedule_shapes(s);
  const auto counts = shape_counts(s, shapes);
  std::vector<std::int64_t> peak(flows.size(), 0);
  std::int64_t cycles = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto demand = stage_demand(s, flows, shapes[i]);
    const auto [lo, hi] = active_cycle_range(s, shapes[i]);
    std::int64_t stage = 0;
    for (std::int64_t c = lo; c <= hi + s.drain_latency; ++c) {
      std::int64_t slots = 1;
      for (std::size_t k = 0; k < flows.size(); ++k) {
        const auto it = demand[k].find(c);
        if (it == demand[k].end()) continue;
        const std::int64_t d = it->second * replicas;
        peak[k] = std::max(peak[k], d);
        if (cap > 0) slots = std::max(slots, (d + cap - 1) / cap);
      }
      stage += slots;
    }
    cycles += counts[i] * stage;
  }

  std::map<std::string, std::int64_t> background;
  for (const auto& b : arch.banks)
    if (b.role == BankRole::StationaryLoad || b.role == BankRole::StationaryDrain) ++background[b.tensor];
  std::int64_t windows = 0;
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const auto& t = arch.pe_modules[k];
    r.bandwidth.push_back({t.tensor, peak[k]});
    r.bw_peak = std::max(r.bw_peak, peak[k]);
    if (cap > 0) r.stall_factor = std::max(r.stall_factor, (peak[k] + cap - 1) / cap);
    if (background[t.tensor] > 0)
      windows = std::max(windows, cap > 0 ? std::max<std::int64_t>(1, (background[t.tensor] + cap - 1) / cap) : 1);
  }
  bool st_in = false, st_out = false;
  for (const auto& t : arch.pe_modules)
    for (auto m : t.modules) {
      st_in |= m == PeModuleKind::StationaryIn;
      st_out |= m == PeModuleKind::StationaryOut;
    }
  r.est_cycles = cycles + (st_in ? windows : 0) + (st_out ? windows : 0);

  // Area: module templates in every occupied PE plus interconnect.
  const double pes = static_cast<double>(arch.occupied_pes());
  for (const auto& t : arch.pe_modules)
    for (auto m : t.modules) {
      switch (m) {
        case PeModuleKind::StationaryIn:
        case PeModuleKind::StationaryOut: r.area_proxy += w.stationary * pes; break;
        case PeModuleKind::SystolicIn:
        case PeModuleKind::SystolicOut: r.area_proxy += w.systolic * pes; break;
        default: r.area_proxy += w.pass * pes; break;
      }
    }
  r.interconnect_area += w.link * static_cast<double>(arch.links.size());
  for (const auto& g : arch.multicast_groups) r.interconnect_area += w.multicast_member * static_cast<double>(g.members.size());
  for (const auto& t : arch.reduction_trees) r.interconnect_area += w.tree_adder * static_cast<double>(t.members.size() - 1);
  r.interconnect_area += w.bank * static_cast<double>(arch.banks.size());
  r.area_proxy += r.interconnect_area;

  // Energy: events of one full stage of one replica, scaled.
  double stage_energy = 0;
  const Box& tile = s.tile;
  stage_energy += w.mac * static_cast<double>(tile[0] * tile[1] * tile[2]);
  for (std::size_t k = 0; k < flows.size(); ++k) {
    const auto& f = flows[k];
    std::set<std::pair<std::int64_t, std::int64_t>> group_cycles;
    std::set<PeCoord> stationary_pes;
    std::set<std::int64_t> stationary_groups;
    Box x{};
    for (x[0] = 0; x[0] < tile[0]; ++x[0])
      for (x[1] = 0; x[1] < tile[1]; ++x[1])
        for (x[2] = 0; x[2] < tile[2]; ++x[2]) {
          Box st{};
          for (std::size_t i = 0; i < 3; ++i)
            st[i] = s.stt(i, 0) * x[0] + s.stt(i, 1) * x[1] + s.stt(i, 2) * x[2] + s.origin[i];
          const PeCoord pe{st[0], st[1]};
          const auto g = f.group.find(pe);
          const bool grouped = g != f.group.end();
          if (f.stationary) {
            if (grouped)
              stationary_groups.insert(g->second);
            else
              stationary_pes.insert(pe);
            continue;
          }
          if (f.chain) {
            const std::int64_t sg = f.input ? -1 : 1;
            if (inside({x[0] + sg * f.u[0], x[1] + sg * f.u[1], x[2] + sg * f.u[2]}, tile)) {
              stage_energy += w.hop;
              continue;
            }
          }
          if (grouped) {
            group_cycles.insert({g->second, st[2]});
            stage_energy += f.input ? w.multicast_delivery : w.tree_add;
          } else {
            stage_energy += w.bank_access;
          }
        }
    stage_energy += w.bank_access * static_cast<double>(group_cycles.size());
    const auto loads = static_cast<double>(stationary_pes.size() + stationary_groups.size());
    stage_energy += (w.stationary_load + w.bank_access) * loads;
  }
  r.energy_proxy = stage_energy * static_cast<double>(s.stage_count * replicas);
  return r;
}

CostReport estimate_cost(const TensorAlgebra& algebra, const DesignPoint& point, ArrayDims array, std::int64_t cap,
                         const CostWeights& weights) {
  return estimate_cost(build_point(algebra, point, array), cap, weights);
}

std::vector<std::size_t> pareto_front(const std::vector<CostReport>& costs) {
  auto dominates = [](const CostReport& a, const CostReport& b) {
    const bool le = a.est_cycles <= b.est_cycles && a.area_proxy <= b.area_proxy && a.energy_proxy <= b.energy_proxy;
    const bool lt = a.est_cycles < b.est_cycles || a.area_proxy < b.area_proxy || a.energy_proxy < b.energy_proxy;
    return le && lt;
  };
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < costs.size() && !dominated; ++j) dominated = j != i && dominates(costs[j], costs[i]);
    if (!dominated) front.push_back(i);
  }
  return front;
}

ExploreResult explore(const TensorAlgebra& algebra, const ExploreOptions& options) {
  ExploreResult result;
  auto points = enumerate_designs(algebra, options.enumerate);
  if (points.empty()) {
    result.status = "empty";
    return result;
  }
  std::vector<CostReport> costs(points.size());
  parallel_for(points.size(), options.enumerate.workers, [&](std::size_t i) {
    costs[i] = estimate_cost(algebra, points[i], options.enumerate.array, options.bandwidth_cap, options.weights);
  });

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a].est_cycles < costs[b].est_cycles; });
  for (auto i : order) {
    result.points.push_back(points[i]);
    result.costs.push_back(costs[i]);
  }

  const std::size_t top = std::min(options.simulate_top, result.points.size());
  if (top > 0) {
    const auto inputs = random_int_inputs(algebra, options.seed);
    parallel_for(top, options.enumerate.workers, [&](std::size_t i) {
      const ArchSpec arch = build_point(algebra, result.points[i], options.enumerate.array);
      SimOptions so;
      so.bandwidth_cap = options.bandwidth_cap;
      result.costs[i].sim_cycles = simulate(arch, inputs, so).total_cycles;
    });
  }

  result.pareto = pareto_front(result.costs);
  std::set<std::string> families;
  for (const auto& p : result.points) families.insert(family_code(p));
  result.families = families.size();
  return result;
}

std::string format_tile(const std::array<std::int64_t, 3>& tile) {
  return std::to_string(tile[0]) + "x" + std::to_string(tile[1]) + "x" + std::to_string(tile[2]);
}

std::string explore_csv(const ExploreResult& result) {
  std::ostringstream os;
  os << "name,selection,T_flat,tiles,kinds,est_cycles,utilization,bw_peak,area_proxy,energy_proxy,sim_cycles\n";
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    const auto& c = result.costs[i];
    os << p.name << ',' << p.selection[0] << ' ' << p.selection[1] << ' ' << p.selection[2] << ',';
    for (std::size_t k = 0; k < 9; ++k) os << (k ? " " : "") << p.stt(k / 3, k % 3);
    os << ',' << format_tile(p.tile) << ',';
    for (std::size_t k = 0; k < p.dataflows.size(); ++k) {
      const auto& df = p.dataflows[k];
      os << (k ? " " : "") << to_string(df.kind);
      if (df.kind == DataflowKind::Reuse2D) os << ':' << to_string(df.sub_kind);
    }
    char util[32];
    std::snprintf(util, sizeof util, "%.6f", c.utilization);
    os << ',' << c.est_cycles << ',' << util << ',' << c.bw_peak << ',' << c.area_proxy << ',' << c.energy_proxy << ',';
    if (c.sim_cycles) os << *c.sim_cycles;
    os << '\n';
  }
  return os.str();
}

}  // namespace stgen
