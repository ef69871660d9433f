#include "stgen/sim.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace stgen {

SimFault::SimFault(const std::string& what, std::int64_t cycle, std::int64_t bank)
    : std::runtime_error("cycle " + std::to_string(cycle) + (bank >= 0 ? ", bank " + std::to_string(bank) : "") + ": " +
                         what),
      cycle_(cycle),
      bank_(bank) {}

std::vector<TensorBandwidth> measure_bandwidth(const SimTrace& trace) {
  std::vector<TensorBandwidth> out;
  for (std::size_t k = 0; k < trace.tensors.size(); ++k) {
    TensorBandwidth bw;
    bw.tensor = trace.tensors[k];
    for (const auto& row : trace.transfers) {
      bw.peak = std::max(bw.peak, row[k]);
      bw.total += row[k];
    }
    bw.average = trace.compute_cycles > 0 ? static_cast<double>(bw.total) / static_cast<double>(trace.compute_cycles) : 0.0;
    out.push_back(bw);
  }
  return out;
}

TensorAlgebra arch_algebra(const ArchSpec& arch) { return parse_tensor_algebra(arch.compute_cell.statement); }

namespace {

enum class Mode { Chain, ChainGroup, Group, Stationary, StationaryGroup, Unicast };

Mode mode_of(const TensorPlan& t) {
  switch (t.dataflow.kind) {
    case DataflowKind::Systolic: return Mode::Chain;
    case DataflowKind::Stationary: return Mode::Stationary;
    case DataflowKind::Multicast:
    case DataflowKind::ReductionTree: return Mode::Group;
    case DataflowKind::Unicast: return Mode::Unicast;
    case DataflowKind::Reuse2D:
      if (t.dataflow.sub_kind == Reuse2DKind::SystolicMulticast) return Mode::ChainGroup;
      if (t.dataflow.sub_kind == Reuse2DKind::MulticastStationary) return Mode::StationaryGroup;
      return Mode::Group;
  }
  return Mode::Unicast;
}

using Box = std::array<std::int64_t, 3>;

bool in_box(const Box& x, const Box& box) {
  for (std::size_t j = 0; j < 3; ++j)
    if (x[j] < 0 || x[j] >= box[j]) return false;
  return true;
}

template <typename T>
struct Slot {
  bool valid = false;
  T value{};
  std::int64_t offset = -1;
};

template <typename T>
struct Port {
  const TensorPlan* plan = nullptr;
  Mode mode = Mode::Unicast;
  bool input = true;
  std::vector<std::int64_t> bank_of;   // per PE: unicast / inject / drain / stationary bank
  std::vector<std::int64_t> group_of;  // per PE: multicast group or reduction tree
  std::vector<std::int64_t> leaf_pos;  // per PE: position inside its group
  std::vector<std::int64_t> in_link, out_link;
  std::vector<std::int64_t> link_delay;
  std::vector<std::vector<Slot<T>>> link_buf;
  std::vector<Slot<T>> link_next;
  std::vector<std::vector<PeCoord>> groups;
  std::vector<std::int64_t> group_bank;
  std::vector<std::int64_t> group_depth;
  Vec3 u{};
  std::vector<Slot<T>> reg;  // stationary operand or accumulator per PE
};

template <typename T>
struct PendingWrite {
  std::int64_t due = 0;
  std::size_t tensor = 0;
  std::int64_t offset = 0;
  T value{};
};

template <typename T>
T pairwise_sum(std::vector<T> v) {
  if (v.empty()) return T{};
  while (v.size() > 1) {
    std::vector<T> next;
    for (std::size_t i = 0; i + 1 < v.size(); i += 2) next.push_back(v[i] + v[i + 1]);
    if (v.size() % 2) next.push_back(v.back());
    v = std::move(next);
  }
  return v[0];
}

template <typename T>
class Engine {
 public:
  Engine(const ArchSpec& arch, const TensorMap<T>& inputs, const SimOptions& opt)
      : arch_(arch), s_(arch.stages), opt_(opt), algebra_(arch_algebra(arch)) {
    check_input_extents(algebra_, inputs);
    for (const auto& in : algebra_.inputs) inputs_.push_back(&inputs.at(in.tensor));
    output_ = Tensor<T>(algebra_.extents(algebra_.output));
    cols_ = arch.array.cols;
    npe_ = arch.array.rows * arch.array.cols;
    geometry_ = schedule_geometry(s_);
    for (std::int64_t r = 0; r < s_.extent[0]; ++r)
      for (std::int64_t c = 0; c < s_.extent[1]; ++c)
        if (geometry_.is_active({r, c})) local_pes_.push_back({r, c});

    for (std::size_t j = 0; j < 3; ++j) sel_idx_[j] = algebra_.iterator_index(s_.selection[j]);
    for (const auto& loop : s_.nest)
      if (loop.role == LoopRole::Replicated) rep_idx_ = algebra_.iterator_index(loop.name);

    build_ports();
    report_.trace.tensors.clear();
    for (const auto& p : ports_) report_.trace.tensors.push_back(p.plan->tensor);
    mac_stamp_.assign(static_cast<std::size_t>(npe_), -1);
  }

  SimReport<T> run() {
    const std::size_t nt = ports_.size();
    pending_.assign(nt, 0);

    // Stage nest odometer.
    std::vector<std::int64_t> counter(s_.nest.size(), 0);
    std::vector<Box> shapes;
    std::vector<std::vector<std::int64_t>> bases;
    std::vector<std::int64_t> rep_base;
    for (;;) {
      std::vector<std::int64_t> base(algebra_.num_iterators(), 0);
      Box shape{};
      std::int64_t rb = 0;
      for (std::size_t l = 0; l < s_.nest.size(); ++l) {
        const auto& loop = s_.nest[l];
        const std::size_t it = algebra_.iterator_index(loop.name);
        base[it] = counter[l] * loop.step;
        if (loop.role == LoopRole::Replicated) rb = base[it];
      }
      for (std::size_t j = 0; j < 3; ++j)
        shape[j] = std::min(s_.tile[j], algebra_.iterators[sel_idx_[j]].bound - base[sel_idx_[j]]);
      shapes.push_back(shape);
      bases.push_back(std::move(base));
      rep_base.push_back(rb);
      std::size_t d = s_.nest.size();
      bool done = true;
      while (d > 0) {
        --d;
        if (++counter[d] < s_.nest[d].trip) {
          done = false;
          break;
        }
        counter[d] = 0;
      }
      if (done) break;
    }

    const bool has_stationary_in = std::ranges::any_of(ports_, [](const Port<T>& p) {
      return p.input && (p.mode == Mode::Stationary || p.mode == Mode::StationaryGroup);
    });
    const bool has_stationary_out = std::ranges::any_of(ports_, [](const Port<T>& p) {
      return !p.input && (p.mode == Mode::Stationary || p.mode == Mode::StationaryGroup);
    });

    if (has_stationary_in) {
      auto loads = count_loads(shapes[0], rep_base[0]);
      for (std::size_t k = 0; k < nt; ++k) pending_[k] += loads[k];
      flush(1, false);
    }

    for (std::size_t st = 0; st < shapes.size(); ++st) {
      if (st + 1 < shapes.size() && has_stationary_in) {
        auto loads = count_loads(shapes[st + 1], rep_base[st + 1]);
        for (std::size_t k = 0; k < nt; ++k) pending_[k] += loads[k];
      }
      run_stage(shapes[st], bases[st], rep_base[st]);
      flush(0, true);
      auto drains = drain_stage();
      for (std::size_t k = 0; k < nt; ++k) pending_[k] += drains[k];
    }
    if (has_stationary_out) flush(1, false);

    report_.stages = static_cast<std::int64_t>(shapes.size());
    report_.total_cycles = static_cast<std::int64_t>(report_.trace.transfers.size());
    report_.fill_drain_cycles = report_.total_cycles - report_.compute_cycles;
    report_.trace.compute_cycles = report_.compute_cycles;
    report_.bandwidth = measure_bandwidth(report_.trace);
    report_.spatial_utilization =
        report_.total_cycles > 0 ? static_cast<double>(report_.macs) / static_cast<double>(npe_ * report_.total_cycles) : 0.0;
    if (report_.macs != algebra_.volume())
      throw SimFault("executed " + std::to_string(report_.macs) + " MACs, iteration space has " +
                         std::to_string(algebra_.volume()),
                     cycle_, -1);
    report_.output = std::move(output_);
    return std::move(report_);
  }

 private:
  struct ActivePe {
    std::int64_t pe;  // global index
    PeCoord coord;
    Box local;
    std::int64_t replica;
    std::vector<std::int64_t> x;
  };

  std::int64_t pe_index(PeCoord p) const { return p.row * cols_ + p.col; }

  void build_ports() {
    std::map<std::string, std::size_t> idx;
    for (const auto& tp : arch_.pe_modules) {
      Port<T> p;
      p.plan = &tp;
      p.mode = mode_of(tp);
      p.input = tp.role == IoRole::Input;
      p.bank_of.assign(static_cast<std::size_t>(npe_), -1);
      p.group_of.assign(static_cast<std::size_t>(npe_), -1);
      p.leaf_pos.assign(static_cast<std::size_t>(npe_), -1);
      p.in_link.assign(static_cast<std::size_t>(npe_), -1);
      p.out_link.assign(static_cast<std::size_t>(npe_), -1);
      p.reg.assign(static_cast<std::size_t>(npe_), {});
      if (p.mode == Mode::Chain) p.u = tp.lattice.iteration_steps.at(0);
      if (p.mode == Mode::ChainGroup) p.u = tp.lattice.iteration_steps.at(1);
      idx[tp.tensor] = ports_.size();
      ports_.push_back(std::move(p));
    }
    auto in_array = [&](PeCoord c) { return c.row >= 0 && c.col >= 0 && c.row < arch_.array.rows && c.col < arch_.array.cols; };
    for (const auto& b : arch_.banks) {
      auto& p = ports_.at(idx.at(b.tensor));
      if (b.pes.size() != 1 || b.role == BankRole::Multicast || b.role == BankRole::Broadcast || b.role == BankRole::TreeRoot)
        continue;
      if (p.mode == Mode::StationaryGroup) continue;
      if (!in_array(b.pes[0])) throw SimFault("bank serves a PE outside the array", 0, b.id);
      p.bank_of[static_cast<std::size_t>(pe_index(b.pes[0]))] = b.id;
    }
    auto add_group = [&](const std::string& tensor, const std::vector<PeCoord>& members, std::int64_t bank, std::int64_t depth) {
      auto& p = ports_.at(idx.at(tensor));
      const auto g = static_cast<std::int64_t>(p.groups.size());
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (!in_array(members[i])) throw SimFault("group member outside the array", 0, bank);
        const auto pi = static_cast<std::size_t>(pe_index(members[i]));
        p.group_of[pi] = g;
        p.leaf_pos[pi] = static_cast<std::int64_t>(i);
      }
      p.groups.push_back(members);
      p.group_bank.push_back(bank);
      p.group_depth.push_back(depth);
    };
    for (const auto& g : arch_.multicast_groups) add_group(g.tensor, g.members, g.bank, 0);
    for (const auto& t : arch_.reduction_trees) add_group(t.tensor, t.members, t.bank, t.depth);
    for (const auto& l : arch_.links) {
      auto& p = ports_.at(idx.at(l.tensor));
      if (!in_array(l.src) || !in_array(l.dst)) throw SimFault("link endpoint outside the array", 0, -1);
      if (l.delay < 1) throw SimFault("link delay must be at least one cycle", 0, -1);
      const auto li = static_cast<std::int64_t>(p.link_delay.size());
      p.link_delay.push_back(l.delay);
      p.out_link[static_cast<std::size_t>(pe_index(l.src))] = li;
      p.in_link[static_cast<std::size_t>(pe_index(l.dst))] = li;
    }
    for (auto& p : ports_) {
      p.link_buf.resize(p.link_delay.size());
      p.link_next.resize(p.link_delay.size());
    }
  }

  /// Tensor offset touched by an iteration; faults when outside the tensor.
  std::int64_t offset_of(std::size_t k, const std::vector<std::int64_t>& x, std::int64_t bank) const {
    const auto& tp = *ports_[k].plan;
    std::vector<std::int64_t> index(tp.access.rows());
    std::int64_t off = 0;
    for (std::size_t d = 0; d < tp.access.rows(); ++d) {
      std::int64_t v = d < tp.offsets.size() ? tp.offsets[d] : 0;
      for (std::size_t i = 0; i < x.size(); ++i) v += tp.access(d, i) * x[i];
      if (v < 0 || v >= tp.extents[d])
        throw SimFault("address " + std::to_string(v) + " outside dimension " + std::to_string(d) + " of " + tp.tensor +
                           " (extent " + std::to_string(tp.extents[d]) + ")",
                       cycle_, bank);
      off = off * tp.extents[d] + v;
    }
    return off;
  }

  std::vector<std::int64_t> index_of(std::size_t k, std::int64_t off) const {
    const auto& ext = ports_[k].plan->extents;
    std::vector<std::int64_t> idx(ext.size());
    for (std::size_t d = ext.size(); d-- > 0;) {
      idx[d] = off % ext[d];
      off /= ext[d];
    }
    return idx;
  }

  T load_value(std::size_t k, std::int64_t off) const { return inputs_[k]->data()[static_cast<std::size_t>(off)]; }

  void event(const char* what, PeCoord pe, std::size_t k, std::int64_t off) {
    if (!opt_.trace_events) return;
    report_.trace.events.push_back(
        {static_cast<std::int64_t>(report_.trace.transfers.size()), pe.row, pe.col, what, ports_[k].plan->tensor, index_of(k, off)});
  }

  bool replica_valid(std::int64_t r, std::int64_t rep_base) const {
    if (!rep_idx_) return r == 0;
    return rep_base + r < algebra_.iterators[*rep_idx_].bound;
  }

  std::vector<std::int64_t> full_iteration(const std::vector<std::int64_t>& base, const Box& local, std::int64_t r) const {
    std::vector<std::int64_t> x = base;
    for (std::size_t j = 0; j < 3; ++j) x[sel_idx_[j]] += local[j];
    if (rep_idx_) x[*rep_idx_] += r;
    return x;
  }

  /// First iteration (in cycle order) of a PE within a stage shape.
  std::optional<Box> first_iteration(PeCoord local, const Box& shape) const {
    const auto [lo, hi] = active_cycle_range(s_, shape);
    for (std::int64_t c = lo; c <= hi; ++c)
      if (auto x = active_iteration(s_, local, c, shape)) return x;
    return std::nullopt;
  }

  std::vector<std::int64_t> count_loads(const Box& shape, std::int64_t rep_base) const {
    std::vector<std::int64_t> n(ports_.size(), 0);
    for (std::size_t k = 0; k < ports_.size(); ++k) {
      const auto& p = ports_[k];
      if (!p.input || (p.mode != Mode::Stationary && p.mode != Mode::StationaryGroup)) continue;
      for (std::int64_t r = 0; r < s_.replicas; ++r) {
        if (!replica_valid(r, rep_base)) continue;
        const PeCoord o = s_.replica_origins[static_cast<std::size_t>(r)];
        std::vector<bool> seen(p.groups.size(), false);
        for (const auto& lp : local_pes_) {
          if (!first_iteration(lp, shape)) continue;
          if (p.mode == Mode::Stationary) {
            ++n[k];
          } else {
            const auto g = p.group_of[static_cast<std::size_t>(pe_index({lp.row + o.row, lp.col + o.col}))];
            if (g >= 0 && !seen[static_cast<std::size_t>(g)]) {
              seen[static_cast<std::size_t>(g)] = true;
              ++n[k];
            }
          }
        }
      }
    }
    return n;
  }

  void load_stationary(const Box& shape, const std::vector<std::int64_t>& base, std::int64_t rep_base) {
    for (std::size_t k = 0; k < ports_.size(); ++k) {
      auto& p = ports_[k];
      if (p.mode != Mode::Stationary && p.mode != Mode::StationaryGroup) continue;
      std::fill(p.reg.begin(), p.reg.end(), Slot<T>{});
      if (!p.input) continue;
      for (std::int64_t r = 0; r < s_.replicas; ++r) {
        if (!replica_valid(r, rep_base)) continue;
        const PeCoord o = s_.replica_origins[static_cast<std::size_t>(r)];
        for (const auto& lp : local_pes_) {
          const auto x = first_iteration(lp, shape);
          if (!x) continue;
          const PeCoord pe{lp.row + o.row, lp.col + o.col};
          const auto pi = static_cast<std::size_t>(pe_index(pe));
          const std::int64_t bank = p.mode == Mode::Stationary ? p.bank_of[pi]
                                    : p.group_of[pi] >= 0      ? p.group_bank[static_cast<std::size_t>(p.group_of[pi])]
                                                               : -1;
          if (bank < 0) throw SimFault("no bank loads the stationary register of " + p.plan->tensor, cycle_, -1);
          const auto off = offset_of(k, full_iteration(base, *x, r), bank);
          p.reg[pi] = {true, load_value(k, off), off};
          event("load", pe, k, off);
        }
      }
    }
  }

  std::vector<std::int64_t> drain_stage() {
    std::vector<std::int64_t> n(ports_.size(), 0);
    for (std::size_t k = 0; k < ports_.size(); ++k) {
      auto& p = ports_[k];
      if (p.input || (p.mode != Mode::Stationary && p.mode != Mode::StationaryGroup)) continue;
      if (p.mode == Mode::Stationary) {
        for (std::int64_t pi = 0; pi < npe_; ++pi) {
          auto& slot = p.reg[static_cast<std::size_t>(pi)];
          if (!slot.valid) continue;
          output_.data()[static_cast<std::size_t>(slot.offset)] += slot.value;
          event("drain", {pi / cols_, pi % cols_}, k, slot.offset);
          ++n[k];
        }
      } else {
        for (std::size_t g = 0; g < p.groups.size(); ++g) {
          std::vector<T> leaves;
          std::int64_t off = -1;
          for (const auto& m : p.groups[g]) {
            const auto& slot = p.reg[static_cast<std::size_t>(pe_index(m))];
            if (!slot.valid) {
              leaves.push_back(T{});
              continue;
            }
            if (off >= 0 && off != slot.offset)
              throw SimFault("reduction tree of " + p.plan->tensor + " combines different output elements", cycle_,
                             p.group_bank[g]);
            off = slot.offset;
            leaves.push_back(slot.value);
          }
          if (off < 0) continue;
          output_.data()[static_cast<std::size_t>(off)] += pairwise_sum(std::move(leaves));
          event("drain", p.groups[g].front(), k, off);
          ++n[k];
        }
      }
      std::fill(p.reg.begin(), p.reg.end(), Slot<T>{});
    }
    return n;
  }

  /// Emits cycles until background queues are empty. `min_cycles` forces a
  /// window even when nothing is queued.
  void flush(std::int64_t min_cycles, bool stall) {
    const std::size_t nt = ports_.size();
    std::int64_t emitted = 0;
    for (;;) {
      const bool empty = std::ranges::all_of(pending_, [](std::int64_t v) { return v == 0; });
      if (empty && emitted >= min_cycles) break;
      std::vector<std::int64_t> row(nt, 0);
      for (std::size_t k = 0; k < nt; ++k) {
        const std::int64_t take = opt_.bandwidth_cap > 0 ? std::min(opt_.bandwidth_cap, pending_[k]) : pending_[k];
        row[k] = take;
        pending_[k] -= take;
      }
      report_.trace.transfers.push_back(std::move(row));
      if (stall) ++report_.stall_cycles;
      ++emitted;
    }
  }

  void account_cycle(const std::vector<std::int64_t>& demand) {
    const std::size_t nt = ports_.size();
    const std::int64_t cap = opt_.bandwidth_cap;
    std::int64_t slots = 1;
    if (cap > 0)
      for (auto d : demand) slots = std::max(slots, (d + cap - 1) / cap);
    std::vector<std::int64_t> total(nt);
    for (std::size_t k = 0; k < nt; ++k) {
      const std::int64_t room = cap > 0 ? slots * cap - demand[k] : std::numeric_limits<std::int64_t>::max();
      const std::int64_t bg = std::min(room, pending_[k]);
      pending_[k] -= bg;
      total[k] = demand[k] + bg;
    }
    for (std::int64_t s = 0; s < slots; ++s) {
      std::vector<std::int64_t> row(nt);
      for (std::size_t k = 0; k < nt; ++k) {
        const std::int64_t take = cap > 0 ? std::min(cap, total[k]) : total[k];
        row[k] = take;
        total[k] -= take;
      }
      report_.trace.transfers.push_back(std::move(row));
    }
    report_.stall_cycles += slots - 1;
  }

  void run_stage(const Box& shape, const std::vector<std::int64_t>& base, std::int64_t rep_base) {
    load_stationary(shape, base, rep_base);
    for (auto& p : ports_)
      for (std::size_t l = 0; l < p.link_buf.size(); ++l)
        p.link_buf[l].assign(static_cast<std::size_t>(p.link_delay[l]), Slot<T>{});
    std::vector<std::int64_t> stage_macs(static_cast<std::size_t>(npe_), 0);
    std::vector<PendingWrite<T>> writes;

    const auto [lo, hi] = active_cycle_range(s_, shape);
    const std::int64_t last = hi + s_.drain_latency;
    const std::size_t nt = ports_.size();
    for (std::int64_t c = lo; c <= last; ++c) {
      ++cycle_;
      current_c_ = c;
      std::vector<std::int64_t> demand(nt, 0);
      std::vector<ActivePe> active;
      if (c <= hi)
        for (std::int64_t r = 0; r < s_.replicas; ++r) {
          if (!replica_valid(r, rep_base)) continue;
          const PeCoord o = s_.replica_origins[static_cast<std::size_t>(r)];
          for (const auto& lp : local_pes_) {
            const auto x = active_iteration(s_, lp, c, shape);
            if (!x) continue;
            const PeCoord pe{lp.row + o.row, lp.col + o.col};
            active.push_back({pe_index(pe), pe, *x, r, full_iteration(base, *x, r)});
          }
        }

      for (auto& p : ports_)
        for (auto& slot : p.link_next) slot = {};
      std::vector<std::map<std::int64_t, std::int64_t>> group_reads(nt);  // group -> offset read this cycle
      std::vector<std::map<std::int64_t, std::vector<std::pair<std::int64_t, T>>>> tree_in(nt);

      for (const auto& a : active) {
        const auto pi = static_cast<std::size_t>(a.pe);
        if (mac_stamp_[pi] == cycle_) throw SimFault("PE performs two MACs in one cycle", cycle_, -1);
        mac_stamp_[pi] = cycle_;
        ++stage_macs[pi];
        ++report_.macs;

        T prod = T{1};
        for (std::size_t k = 0; k < nt; ++k) {
          auto& p = ports_[k];
          if (!p.input) continue;
          prod *= fetch(k, p, a, shape, demand, group_reads);
        }
        if (opt_.trace_events) event("mac", a.coord, nt - 1, offset_of(nt - 1, a.x, -1));
        for (std::size_t k = 0; k < nt; ++k) {
          auto& p = ports_[k];
          if (p.input) continue;
          store(k, p, a, shape, prod, c, demand, tree_in, writes);
        }
      }

      for (std::size_t k = 0; k < nt; ++k)
        for (auto& [g, leaves] : tree_in[k]) {
          auto& p = ports_[k];
          const auto gi = static_cast<std::size_t>(g);
          std::vector<T> vals(p.groups[gi].size(), T{});
          for (const auto& [pos, v] : leaves) vals[static_cast<std::size_t>(pos)] = v;
          const std::int64_t off = tree_offset_[k][g];
          writes.push_back({c + p.group_depth[gi], k, off, pairwise_sum(std::move(vals))});
        }
      tree_offset_.clear();

      std::vector<PendingWrite<T>> later;
      for (auto& w : writes) {
        if (w.due > c) {
          later.push_back(w);
          continue;
        }
        output_.data()[static_cast<std::size_t>(w.offset)] += w.value;
        ++demand[w.tensor];
      }
      writes = std::move(later);

      for (auto& p : ports_)
        for (std::size_t l = 0; l < p.link_buf.size(); ++l) {
          auto& buf = p.link_buf[l];
          buf[static_cast<std::size_t>(c % static_cast<std::int64_t>(buf.size()))] = p.link_next[l];
        }
      account_cycle(demand);
    }
    if (!writes.empty()) throw SimFault("reduction tree result still in flight at stage end", cycle_, -1);
    report_.compute_cycles += *std::max_element(stage_macs.begin(), stage_macs.end());
  }

  Slot<T> read_link(Port<T>& p, std::size_t pi, std::int64_t c) {
    const std::int64_t l = p.in_link[pi];
    if (l < 0) throw SimFault("no link drives the " + p.plan->tensor + " port of PE " + std::to_string(pi), cycle_, -1);
    const auto& buf = p.link_buf[static_cast<std::size_t>(l)];
    return buf[static_cast<std::size_t>(c % static_cast<std::int64_t>(buf.size()))];
  }

  std::int64_t current_c_ = 0;

  T fetch(std::size_t k, Port<T>& p, const ActivePe& a, const Box& shape, std::vector<std::int64_t>& demand,
          std::vector<std::map<std::int64_t, std::int64_t>>& group_reads) {
    const auto pi = static_cast<std::size_t>(a.pe);
    auto group_read = [&](std::int64_t off) {
      const std::int64_t g = p.group_of[pi];
      if (g < 0) throw SimFault("no multicast group feeds " + p.plan->tensor, cycle_, -1);
      auto [it, fresh] = group_reads[k].try_emplace(g, off);
      if (fresh) {
        ++demand[k];
        event("read", a.coord, k, off);
      } else if (it->second != off) {
        throw SimFault("multicast group of " + p.plan->tensor + " serves two elements in one cycle", cycle_,
                       p.group_bank[static_cast<std::size_t>(g)]);
      }
      return load_value(k, off);
    };
    switch (p.mode) {
      case Mode::Unicast: {
        const std::int64_t bank = p.bank_of[pi];
        if (bank < 0) throw SimFault("no bank drives the " + p.plan->tensor + " port", cycle_, -1);
        const auto off = offset_of(k, a.x, bank);
        ++demand[k];
        event("read", a.coord, k, off);
        return load_value(k, off);
      }
      case Mode::Group: {
        const std::int64_t g = p.group_of[pi];
        const auto off = offset_of(k, a.x, g >= 0 ? p.group_bank[static_cast<std::size_t>(g)] : -1);
        return group_read(off);
      }
      case Mode::Stationary:
      case Mode::StationaryGroup: {
        const auto& slot = p.reg[pi];
        const auto off = offset_of(k, a.x, -1);
        if (!slot.valid || slot.offset != off)
          throw SimFault("stationary register of " + p.plan->tensor + " holds the wrong element", cycle_, -1);
        return slot.value;
      }
      case Mode::Chain:
      case Mode::ChainGroup: {
        const Box prev{a.local[0] - p.u[0], a.local[1] - p.u[1], a.local[2] - p.u[2]};
        const std::int64_t bank = p.mode == Mode::Chain ? p.bank_of[pi]
                                  : p.group_of[pi] >= 0 ? p.group_bank[static_cast<std::size_t>(p.group_of[pi])]
                                                        : -1;
        const auto off = offset_of(k, a.x, bank);
        Slot<T> v;
        if (!in_box(prev, shape)) {
          if (p.mode == Mode::ChainGroup) {
            v = {true, group_read(off), off};
          } else {
            if (bank < 0) throw SimFault("no bank injects " + p.plan->tensor + " at a chain head", cycle_, -1);
            ++demand[k];
            event("read", a.coord, k, off);
            v = {true, load_value(k, off), off};
          }
        } else {
          v = read_link(p, pi, current_c_);
          if (!v.valid || v.offset != off)
            throw SimFault("systolic link of " + p.plan->tensor + " delivered the wrong element", cycle_, -1);
        }
        if (p.out_link[pi] >= 0) p.link_next[static_cast<std::size_t>(p.out_link[pi])] = v;
        return v.value;
      }
    }
    return T{};
  }

  void store(std::size_t k, Port<T>& p, const ActivePe& a, const Box& shape, T prod, std::int64_t c,
             std::vector<std::int64_t>& demand,
             std::vector<std::map<std::int64_t, std::vector<std::pair<std::int64_t, T>>>>& tree_in,
             std::vector<PendingWrite<T>>& writes) {
    (void)writes;  // tree results are queued after all leaves arrive
    const auto pi = static_cast<std::size_t>(a.pe);
    const auto off = offset_of(k, a.x, -1);
    auto to_tree = [&](T v) {
      const std::int64_t g = p.group_of[pi];
      if (g < 0) throw SimFault("no reduction tree collects " + p.plan->tensor, cycle_, -1);
      auto [it, fresh] = tree_offset_[k].try_emplace(g, off);
      if (!fresh && it->second != off)
        throw SimFault("reduction tree of " + p.plan->tensor + " combines different output elements", cycle_,
                       p.group_bank[static_cast<std::size_t>(g)]);
      tree_in[k][g].push_back({p.leaf_pos[pi], v});
    };
    switch (p.mode) {
      case Mode::Unicast: {
        if (p.bank_of[pi] < 0) throw SimFault("no bank takes the " + p.plan->tensor + " port", cycle_, -1);
        output_.data()[static_cast<std::size_t>(off)] += prod;
        ++demand[k];
        event("write", a.coord, k, off);
        return;
      }
      case Mode::Group:
        to_tree(prod);
        return;
      case Mode::Stationary:
      case Mode::StationaryGroup: {
        auto& slot = p.reg[pi];
        if (!slot.valid) slot = {true, T{}, off};
        if (slot.offset != off) throw SimFault("stationary accumulator of " + p.plan->tensor + " switched elements", cycle_, -1);
        slot.value += prod;
        return;
      }
      case Mode::Chain:
      case Mode::ChainGroup: {
        const Box prev{a.local[0] - p.u[0], a.local[1] - p.u[1], a.local[2] - p.u[2]};
        const Box next{a.local[0] + p.u[0], a.local[1] + p.u[1], a.local[2] + p.u[2]};
        T partial{};
        if (in_box(prev, shape)) {
          const auto in = read_link(p, pi, c);
          if (!in.valid || in.offset != off)
            throw SimFault("systolic link of " + p.plan->tensor + " delivered the wrong partial sum", cycle_, -1);
          partial = in.value;
        }
        partial += prod;
        if (in_box(next, shape)) {
          if (p.out_link[pi] < 0) throw SimFault("no link carries " + p.plan->tensor + " partial sums", cycle_, -1);
          p.link_next[static_cast<std::size_t>(p.out_link[pi])] = {true, partial, off};
        } else if (p.mode == Mode::ChainGroup) {
          to_tree(partial);
        } else {
          if (p.bank_of[pi] < 0) throw SimFault("no bank drains " + p.plan->tensor + " at a chain tail", cycle_, -1);
          output_.data()[static_cast<std::size_t>(off)] += partial;
          ++demand[k];
          event("write", a.coord, k, off);
        }
        return;
      }
    }
  }

  const ArchSpec& arch_;
  const StageSchedule& s_;
  SimOptions opt_;
  TensorAlgebra algebra_;
  std::vector<const Tensor<T>*> inputs_;
  Tensor<T> output_;
  std::int64_t cols_ = 1, npe_ = 1;
  ReplicaGeometry geometry_;
  std::vector<PeCoord> local_pes_;
  std::array<std::size_t, 3> sel_idx_{};
  std::optional<std::size_t> rep_idx_;
  std::vector<Port<T>> ports_;
  std::vector<std::int64_t> pending_;
  std::vector<std::int64_t> mac_stamp_;
  std::map<std::size_t, std::map<std::int64_t, std::int64_t>> tree_offset_;
  std::int64_t cycle_ = 0;
  SimReport<T> report_;
};

}  // namespace

template <typename T>
SimReport<T> simulate(const ArchSpec& arch, const TensorMap<T>& inputs, const SimOptions& options) {
  if (options.bandwidth_cap < 0) throw std::invalid_argument("bandwidth cap must be non-negative");
  Engine<T> engine(arch, inputs, options);
  return engine.run();
}

template SimReport<std::int64_t> simulate(const ArchSpec&, const TensorMap<std::int64_t>&, const SimOptions&);
template SimReport<double> simulate(const ArchSpec&, const TensorMap<double>&, const SimOptions&);

}  // namespace stgen
