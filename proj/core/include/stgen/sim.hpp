#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stgen/arch.hpp"
#include "stgen/reference.hpp"
#include "stgen/tensor.hpp"

namespace stgen {

/// Raised for hardware-level errors: a bank addressing outside its tensor,
/// a PE asked to do two MACs in one cycle, an undriven port, or a value
/// arriving at a PE that expected a different element.
class SimFault : public std::runtime_error {
 public:
  SimFault(const std::string& what, std::int64_t cycle, std::int64_t bank);

  std::int64_t cycle() const { return cycle_; }
  std::int64_t bank() const { return bank_; }  // -1 when no bank is involved

 private:
  std::int64_t cycle_;
  std::int64_t bank_;
};

struct SimOptions {
  /// Bank transfers per tensor per cycle; 0 means unlimited.
  std::int64_t bandwidth_cap = 0;
  /// Record per-PE events in the trace.
  bool trace_events = false;
};

struct TraceEvent {
  std::int64_t cycle = 0;
  std::int64_t pe_row = 0;
  std::int64_t pe_col = 0;
  std::string event;  // "read", "write", "load", "drain", "mac"
  std::string tensor;
  std::vector<std::int64_t> index;
};

/// Bank transfers per tensor for every cycle of the run, plus optional
/// per-PE events.
struct SimTrace {
  std::vector<std::string> tensors;
  std::vector<std::vector<std::int64_t>> transfers;  // [cycle][tensor]
  std::int64_t compute_cycles = 0;
  std::vector<TraceEvent> events;
};

struct TensorBandwidth {
  std::string tensor;
  std::int64_t peak = 0;  // elements in the busiest cycle
  double average = 0;     // elements per compute cycle
  std::int64_t total = 0;

  bool operator==(const TensorBandwidth&) const = default;
};

std::vector<TensorBandwidth> measure_bandwidth(const SimTrace& trace);

template <typename T>
struct SimReport {
  std::int64_t total_cycles = 0;
  std::int64_t compute_cycles = 0;
  std::int64_t fill_drain_cycles = 0;  // total - compute, stalls included
  std::int64_t stall_cycles = 0;
  std::int64_t macs = 0;
  std::int64_t stages = 0;
  double spatial_utilization = 0;
  std::vector<TensorBandwidth> bandwidth;
  Tensor<T> output;
  SimTrace trace;
};

/// Runs the architecture cycle by cycle on `inputs`. Throws SimFault on
/// hardware errors and std::invalid_argument on bad inputs.
template <typename T>
SimReport<T> simulate(const ArchSpec& arch, const TensorMap<T>& inputs, const SimOptions& options = {});

/// The algebra recorded in the architecture's compute cell.
TensorAlgebra arch_algebra(const ArchSpec& arch);

}  // namespace stgen
