#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gen.hpp"
#include "stgen/arch.hpp"
#include "stgen/dse.hpp"
#include "stgen/sim.hpp"

using namespace stgen;

namespace {

const IntMatrix kOs{{1, 0, 0}, {0, 1, 0}, {1, 1, 1}};

ArchSpec make(const TensorAlgebra& a, const IntMatrix& t, ArrayDims array, std::array<std::string, 3> sel = {"m", "n", "k"}) {
  GenerateOptions opt;
  opt.tiling.array = array;
  return generate_arch(a, {t, sel}, opt);
}

std::int64_t peak_of(const SimReport<std::int64_t>& r, const std::string& tensor) {
  for (const auto& b : r.bandwidth)
    if (b.tensor == tensor) return b.peak;
  return -1;
}

}  // namespace

TEST(Sim, SingleProcessingElementIsSequential) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=1 n=1 k=4");
  EnumerateOptions eo;
  eo.array = {1, 1};
  const auto pts = enumerate_designs(a, eo);
  ASSERT_FALSE(pts.empty());
  const auto in = random_int_inputs(a, 4);
  std::int64_t dot = 0;
  for (std::size_t k = 0; k < 4; ++k) dot += in.at("A").data()[k] * in.at("B").data()[k];
  for (const auto& p : pts) {
    const auto r = simulate(build_point(a, p, eo.array), in);
    EXPECT_EQ(r.output.data(), std::vector<std::int64_t>{dot}) << p.name;
    EXPECT_EQ(r.compute_cycles, 4) << p.name;
  }
}

TEST(Sim, OutputStationaryGemm16) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16");
  const auto in = random_int_inputs(a, 1);
  const auto r = simulate(make(a, kOs, {16, 16}), in);
  EXPECT_EQ(r.output, reference_execute(a, in));
  EXPECT_EQ(r.total_cycles, 47);
  EXPECT_EQ(r.compute_cycles, 16);
  EXPECT_EQ(r.fill_drain_cycles, 31);
  EXPECT_EQ(r.macs, 4096);
  EXPECT_EQ(peak_of(r, "A"), 16);
  EXPECT_EQ(peak_of(r, "B"), 16);
}

TEST(Sim, UtilizationApproachesOneAsReductionGrows) {
  double last = 0;
  for (std::int64_t k : {16, 64, 256}) {
    const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=" + std::to_string(k));
    const auto in = random_int_inputs(a, 2);
    const auto r = simulate(make(a, kOs, {16, 16}), in);
    ASSERT_EQ(r.output, reference_execute(a, in));
    // Skew of 30 cycles plus one drain window, paid once.
    EXPECT_EQ(r.total_cycles, k + 31);
    EXPECT_NEAR(r.spatial_utilization, static_cast<double>(k) / static_cast<double>(k + 31), 1e-12);
    EXPECT_GT(r.spatial_utilization, last);
    last = r.spatial_utilization;
  }
  EXPECT_GT(last, 0.89);
}

TEST(Sim, UnicastPeakEqualsProcessingElements) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k,n] * B[m,k]; m=2 n=2 k=3");
  const auto in = random_int_inputs(a, 1);
  const auto r = simulate(make(a, IntMatrix::identity(3), {2, 2}), in);
  EXPECT_EQ(r.output, reference_execute(a, in));
  EXPECT_EQ(peak_of(r, "A"), 4);
}

TEST(Sim, BroadcastPeakIsOne) {
  const auto a = parse_tensor_algebra("C[m,n] += A[k] * B[m,n,k]; m=4 n=4 k=4");
  const auto in = random_int_inputs(a, 1);
  const auto r = simulate(make(a, IntMatrix::identity(3), {4, 4}), in);
  EXPECT_EQ(r.output, reference_execute(a, in));
  EXPECT_EQ(peak_of(r, "A"), 1);
}

TEST(Sim, UnicastStallsScaleWithBandwidthRatio) {
  const auto a = parse_tensor_algebra("D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=16 j=16 k=16 l=16");
  const auto arch = make(a, IntMatrix::identity(3), {16, 16}, {"i", "k", "l"});
  ASSERT_EQ(arch.pe_modules[0].dataflow.kind, DataflowKind::Unicast);
  const auto in = random_int_inputs(a, 1);
  SimOptions so;
  const auto free = simulate(arch, in, so);
  so.bandwidth_cap = 16;
  const auto capped = simulate(arch, in, so);
  EXPECT_EQ(capped.output, free.output);
  // 256 unicast ports behind 16 transfers per cycle: every compute cycle
  // takes 16.
  EXPECT_EQ(capped.compute_cycles, free.compute_cycles);
  EXPECT_EQ(capped.total_cycles - 2, 16 * (free.total_cycles - 2));
  EXPECT_EQ(capped.stall_cycles, capped.total_cycles - free.total_cycles);
  EXPECT_EQ(estimate_cost(arch, 16).est_cycles, capped.total_cycles);
}

TEST(Sim, FloatingPointMode) {
  const auto a = parse_tensor_algebra("D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=4 j=3 k=4 l=2");
  const auto in = random_real_inputs(a, 5);
  const auto r = simulate(make(a, IntMatrix{{1, 0, 0}, {0, 0, 1}, {0, 1, 0}}, {4, 4}, {"i", "k", "l"}), in);
  const auto want = reference_execute(a, in);
  ASSERT_EQ(r.output.extents(), want.extents());
  for (std::size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(r.output.data()[i], want.data()[i], 1e-6 * std::max(1.0, std::abs(want.data()[i])));
}

TEST(Sim, RejectsWrongInputExtents) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  auto in = random_int_inputs(a, 1);
  in["B"] = Tensor<std::int64_t>({4, 5});
  EXPECT_THROW(simulate(make(a, kOs, {4, 4}), in), std::invalid_argument);
}

TEST(Sim, FaultsOnAddressOutsideTensor) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  auto arch = make(a, kOs, {4, 4});
  arch.pe_modules[0].extents = {2, 4};
  try {
    simulate(arch, random_int_inputs(a, 1));
    FAIL() << "expected SimFault";
  } catch (const SimFault& f) {
    EXPECT_GE(f.cycle(), 0);
    EXPECT_GE(f.bank(), 0);
  }
}

TEST(Sim, FaultsOnMissingBank) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  auto arch = make(a, kOs, {4, 4});
  std::erase_if(arch.banks, [](const BankDescriptor& b) { return b.tensor == "A"; });
  EXPECT_NE(check_port_driving(arch), "");
  EXPECT_THROW(simulate(arch, random_int_inputs(a, 1)), SimFault);
}

TEST(Sim, FaultsOnBrokenLink) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  auto arch = make(a, kOs, {4, 4});
  for (auto& l : arch.links)
    if (l.tensor == "B") l.delay = 2;
  EXPECT_NE(check_delay_consistency(arch), "");
  EXPECT_THROW(simulate(arch, random_int_inputs(a, 1)), SimFault);
}

TEST(Sim, MeasureBandwidthOfTrace) {
  SimTrace tr;
  tr.tensors = {"A", "B"};
  tr.transfers = {{4, 0}, {2, 1}, {0, 1}, {0, 0}};
  tr.compute_cycles = 2;
  const auto bw = measure_bandwidth(tr);
  ASSERT_EQ(bw.size(), 2u);
  EXPECT_EQ(bw[0], (TensorBandwidth{"A", 4, 3.0, 6}));
  EXPECT_EQ(bw[1], (TensorBandwidth{"B", 1, 1.0, 2}));
}

TEST(SimProperty, DeterministicReports) {
  const auto a = parse_tensor_algebra("C[k,y,x] += A[k,y+p,x+q] * B[k,p,q]; k=3 y=4 x=4 p=2 q=2");
  EnumerateOptions eo;
  eo.array = {4, 4};
  const auto pts = enumerate_designs(a, eo);
  const auto in = random_int_inputs(a, 8);
  for (std::size_t i = 0; i < pts.size(); i += 97) {
    const auto arch = build_point(a, pts[i], eo.array);
    SimOptions so;
    so.bandwidth_cap = 3;
    so.trace_events = true;
    const auto r1 = simulate(arch, in, so);
    const auto r2 = simulate(arch, in, so);
    ASSERT_EQ(r1.total_cycles, r2.total_cycles);
    ASSERT_EQ(r1.output, r2.output);
    ASSERT_EQ(r1.bandwidth, r2.bandwidth);
    ASSERT_EQ(r1.trace.transfers, r2.trace.transfers);
    ASSERT_EQ(r1.trace.events.size(), r2.trace.events.size());
  }
}

TEST(SimProperty, OracleEquivalenceOnSmallArrays) {
  gen::Rng rng(61);
  const std::vector<std::string> sources{
      "C[m,n] += A[m,k] * B[n,k]; m=%0 n=%1 k=%2",
      "C[m,n] += A[m,k,n] * B[m,k]; m=%0 n=%1 k=%2",
      "C[k,y,x] += A[c,y+p,x+q] * B[k,c,p,q]; k=%0 c=%1 y=%2 x=%3 p=%1 q=%0",
      "C[k,y,x] += A[k,y+p,x+q] * B[k,p,q]; k=%0 y=%1 x=%2 p=%3 q=%1",
      "D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=%0 j=%1 k=%2 l=%3",
      "D[i,j,k] += A[i,l,m] * B[l,j] * C[m,k]; i=%0 j=%1 k=%2 l=%3 m=%0",
  };
  for (int trial = 0; trial < 300; ++trial) {
    std::string src = sources[static_cast<std::size_t>(trial) % sources.size()];
    for (int i = 0; i < 4; ++i) {
      const std::string tag = "%" + std::to_string(i);
      for (auto pos = src.find(tag); pos != std::string::npos; pos = src.find(tag))
        src.replace(pos, tag.size(), std::to_string(gen::uniform(rng, 1, 5)));
    }
    const auto a = parse_tensor_algebra(src);
    std::vector<std::size_t> idx(a.num_iterators());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    const SttMatrix t{gen::full_rank_stt(rng), {a.iterators[idx[0]].name, a.iterators[idx[1]].name, a.iterators[idx[2]].name}};
    GenerateOptions opt;
    opt.tiling.array = {gen::uniform(rng, 1, 8), gen::uniform(rng, 1, 8)};
    ArchSpec arch;
    try {
      arch = generate_arch(a, t, opt);
    } catch (const UnsupportedDesign&) {
      continue;
    }
    ASSERT_LE(arch.stages.tile[0] * arch.stages.tile[1] * arch.stages.tile[2], 512);
    const auto in = random_int_inputs(a, static_cast<std::uint64_t>(trial));
    SimOptions so;
    so.bandwidth_cap = gen::uniform(rng, 0, 4);
    const auto r = simulate(arch, in, so);
    ASSERT_EQ(r.output, reference_execute(a, in)) << src << ' ' << t.entries;
    ASSERT_EQ(r.macs, a.volume());
    ASSERT_EQ(r.total_cycles, r.compute_cycles + r.fill_drain_cycles);
    ASSERT_GE(r.spatial_utilization, 0.0);
    ASSERT_LE(r.spatial_utilization, 1.0);
  }
}

TEST(SimProperty, MoreBandwidthNeverCostsCycles) {
  const auto a = parse_tensor_algebra("D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=3 j=4 k=3 l=4");
  EnumerateOptions eo;
  eo.array = {4, 4};
  const auto pts = enumerate_designs(a, eo);
  const auto in = random_int_inputs(a, 2);
  for (std::size_t i = 0; i < pts.size(); i += 53) {
    const auto arch = build_point(a, pts[i], eo.array);
    std::int64_t prev = -1;
    for (std::int64_t cap : {1, 2, 3, 4, 8, 16, 0}) {
      SimOptions so;
      so.bandwidth_cap = cap;
      const auto r = simulate(arch, in, so);
      if (prev >= 0) ASSERT_LE(r.total_cycles, prev) << pts[i].name << " cap " << cap;
      prev = r.total_cycles;
    }
  }
}
