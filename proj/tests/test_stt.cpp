#include <gtest/gtest.h>

#include <set>

#include "gen.hpp"
#include "stgen/stt.hpp"

using namespace stgen;

namespace {

const IntMatrix kOs{{1, 0, 0}, {0, 1, 0}, {1, 1, 1}};

SttMatrix stt(const IntMatrix& t, std::array<std::string, 3> sel = {"m", "n", "k"}) { return {t, sel}; }

// (A * T^-1) * v with T^-1 = adj(T) / det(T); zero iff A * adj(T) * v is zero.
bool annihilates(const IntMatrix& a, const IntMatrix& t, const Vec3& v) {
  const IntMatrix m = a * adjugate3(t);
  const auto r = m * std::span<const std::int64_t>(v);
  for (auto x : r)
    if (x != 0) return false;
  return true;
}

}  // namespace

TEST(Stt, Legality) {
  const auto v = validate_stt(stt(kOs));
  EXPECT_TRUE(v.legal);
  EXPECT_EQ(v.determinant, 1);
  EXPECT_TRUE(validate_stt(stt(IntMatrix::identity(3))).legal);
  const auto bad = validate_stt(stt(IntMatrix{{1, 0, 0}, {1, 0, 0}, {0, 0, 1}}));
  EXPECT_FALSE(bad.legal);
  EXPECT_EQ(bad.determinant, 0);
}

TEST(Stt, ParseAndFormatEntries) {
  EXPECT_EQ(parse_stt_entries("1,0,0;0,1,0;1,1,1"), kOs);
  EXPECT_EQ(format_stt_entries(kOs), "1,0,0;0,1,0;1,1,1");
  EXPECT_THROW(parse_stt_entries("1,0;0,1"), std::invalid_argument);
  EXPECT_THROW(parse_stt_entries("1,0,0;0,x,0;1,1,1"), std::invalid_argument);
}

TEST(Stt, WorkedExampleMapsToPe12AtCycle6) {
  const std::vector<std::int64_t> x{1, 2, 3};
  const auto st = space_time_map(stt(kOs), x);
  EXPECT_EQ(st.p, (std::array<std::int64_t, 2>{1, 2}));
  EXPECT_EQ(st.t, 6);
}

TEST(Stt, IdentityMapIsPassThrough) {
  const std::vector<std::int64_t> x{4, -2, 7};
  const auto st = space_time_map(stt(IntMatrix::identity(3)), x);
  EXPECT_EQ(st.p, (std::array<std::int64_t, 2>{4, -2}));
  EXPECT_EQ(st.t, 7);
}

TEST(SttProperty, MapMatchesMatrixVectorProduct) {
  gen::Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const IntMatrix t = gen::full_rank_stt(rng);
    const Vec3 x = gen::vec3(rng, -10, 10);
    const auto st = space_time_map(stt(t), x);
    std::array<std::int64_t, 3> want{};
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) want[r] += t(r, c) * x[c];
    ASSERT_EQ(st.p[0], want[0]);
    ASSERT_EQ(st.p[1], want[1]);
    ASSERT_EQ(st.t, want[2]);
  }
}

TEST(SttProperty, MapIsInjectiveOnTiles) {
  gen::Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const IntMatrix t = gen::full_rank_stt(rng);
    std::set<SpaceTimePoint> seen;
    for (std::int64_t a = 0; a < 4; ++a)
      for (std::int64_t b = 0; b < 4; ++b)
        for (std::int64_t c = 0; c < 4; ++c) {
          const std::vector<std::int64_t> x{a, b, c};
          ASSERT_TRUE(seen.insert(space_time_map(stt(t), x)).second) << t;
        }
  }
}

TEST(Stt, ReuseSpaceOfGemmA) {
  const auto rs = reuse_space(IntMatrix{{1, 0, 0}, {0, 0, 1}}, stt(kOs));
  EXPECT_EQ(rs.dimension, 1);
  EXPECT_EQ(rs.basis, (std::vector<Vec3>{{0, 1, 1}}));
}

TEST(Stt, ReuseSpaceOfGemmC) {
  const auto rs = reuse_space(IntMatrix{{1, 0, 0}, {0, 1, 0}}, stt(kOs));
  EXPECT_EQ(rs.dimension, 1);
  EXPECT_EQ(rs.basis, (std::vector<Vec3>{{0, 0, 1}}));
}

TEST(Stt, ReuseSpaceOfBatchedGemvAIsEmpty) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k,n] * B[m,k]; m=4 n=4 k=4");
  const std::array<std::size_t, 3> sel{0, 2, 1};
  const auto rs = reuse_space(restrict_access(a.inputs[0], sel), stt(IntMatrix::identity(3), {"m", "k", "n"}));
  EXPECT_EQ(rs.dimension, 0);
  EXPECT_TRUE(rs.basis.empty());
}

TEST(Stt, ReuseSpaceOfMttkrpB) {
  const auto a = parse_tensor_algebra("D[i,j] += A[i,k,l] * B[k,j] * C[l,j]; i=4 j=4 k=4 l=4");
  const std::array<std::size_t, 3> sel{0, 2, 3};
  const IntMatrix restricted = restrict_access(a.inputs[1], sel);
  EXPECT_EQ(restricted, (IntMatrix{{0, 1, 0}, {0, 0, 0}}));
  const auto rs = reuse_space(restricted, stt(IntMatrix::identity(3), {"i", "k", "l"}));
  EXPECT_EQ(rs.dimension, 2);
  EXPECT_EQ(rs.basis, (std::vector<Vec3>{{1, 0, 0}, {0, 0, 1}}));
}

TEST(Stt, ClassifyExamples) {
  const auto sys = classify_dataflow({1, {{0, 1, 1}}}, IoRole::Input);
  EXPECT_EQ(sys.kind, DataflowKind::Systolic);
  EXPECT_EQ(sys.direction, (std::vector<Vec3>{{0, 1, 1}}));
  EXPECT_EQ(classify_dataflow({1, {{0, 0, 1}}}, IoRole::Output).kind, DataflowKind::Stationary);
  const auto ms = classify_dataflow({2, {{1, 0, 0}, {0, 0, 1}}}, IoRole::Input);
  EXPECT_EQ(ms.kind, DataflowKind::Reuse2D);
  EXPECT_EQ(ms.sub_kind, Reuse2DKind::MulticastStationary);
  EXPECT_EQ(classify_dataflow({0, {}}, IoRole::Input).kind, DataflowKind::Unicast);
  EXPECT_EQ(classify_dataflow({1, {{1, 0, 0}}}, IoRole::Input).kind, DataflowKind::Multicast);
  EXPECT_EQ(classify_dataflow({1, {{1, 0, 0}}}, IoRole::Output).kind, DataflowKind::ReductionTree);
}

TEST(Stt, DegenerateReuseIsBroadcast) {
  const auto rs = reuse_space(IntMatrix(1, 3), stt(kOs));
  EXPECT_EQ(rs.dimension, 3);
  const auto df = classify_dataflow(rs, IoRole::Input);
  EXPECT_EQ(df.kind, DataflowKind::Reuse2D);
  EXPECT_EQ(df.sub_kind, Reuse2DKind::Broadcast);
  EXPECT_TRUE(df.degenerate);
}

struct TableRow {
  const char* label;
  IntMatrix access;
  IntMatrix t;
  IoRole role;
  DataflowKind kind;
  Reuse2DKind sub;
  int dimension;
};

TEST(Stt, ClassificationCoverage) {
  const IntMatrix id = IntMatrix::identity(3);
  const std::vector<TableRow> rows{
      {"unicast", id, id, IoRole::Input, DataflowKind::Unicast, Reuse2DKind::None, 0},
      {"stationary", {{1, 0, 0}, {0, 1, 0}}, kOs, IoRole::Output, DataflowKind::Stationary, Reuse2DKind::None, 1},
      {"systolic", {{1, 0, 0}, {0, 0, 1}}, kOs, IoRole::Input, DataflowKind::Systolic, Reuse2DKind::None, 1},
      {"multicast", {{1, 0, 0}, {0, 0, 1}}, id, IoRole::Input, DataflowKind::Multicast, Reuse2DKind::None, 1},
      {"broadcast", {{0, 0, 1}}, id, IoRole::Input, DataflowKind::Reuse2D, Reuse2DKind::Broadcast, 2},
      {"multicast-stationary", {{0, 1, 0}}, id, IoRole::Input, DataflowKind::Reuse2D,
       Reuse2DKind::MulticastStationary, 2},
      {"systolic-multicast", {{0, 0, 1}}, kOs, IoRole::Input, DataflowKind::Reuse2D, Reuse2DKind::SystolicMulticast,
       2},
  };
  for (const auto& row : rows) {
    SCOPED_TRACE(row.label);
    const auto rs = reuse_space(row.access, stt(row.t));
    ASSERT_EQ(rs.dimension, row.dimension);
    for (const auto& v : rs.basis) EXPECT_TRUE(annihilates(row.access, row.t, v));
    const auto df = classify_dataflow(rs, row.role);
    EXPECT_EQ(df.kind, row.kind);
    EXPECT_EQ(df.sub_kind, row.sub);
  }
}

TEST(Stt, GemmWorkedExampleAnalysis) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=16 n=16 k=16");
  const auto an = analyze_dataflow(a, stt(kOs));
  ASSERT_EQ(an.tensors.size(), 3u);
  EXPECT_EQ(an.tensors[0].dataflow.kind, DataflowKind::Systolic);
  EXPECT_EQ(an.tensors[0].reuse.basis, (std::vector<Vec3>{{0, 1, 1}}));
  EXPECT_EQ(an.tensors[1].dataflow.kind, DataflowKind::Systolic);
  EXPECT_EQ(an.tensors[1].reuse.basis, (std::vector<Vec3>{{1, 0, 1}}));
  EXPECT_EQ(an.tensors[2].dataflow.kind, DataflowKind::Stationary);
  EXPECT_EQ(an.tensors[2].reuse.basis, (std::vector<Vec3>{{0, 0, 1}}));
  EXPECT_EQ(an.name, "MNK-SST");
}

TEST(Stt, GemmIdentityAnalysis) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  const auto an = analyze_dataflow(a, stt(IntMatrix::identity(3)));
  EXPECT_EQ(an.tensors[2].dataflow.kind, DataflowKind::Stationary);
  EXPECT_EQ(an.tensors[2].reuse.basis, (std::vector<Vec3>{{0, 0, 1}}));
  EXPECT_EQ(an.name, "MNK-MMT");
}

TEST(Stt, AnalysisRejectsBadInput) {
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  EXPECT_THROW(analyze_dataflow(a, stt(IntMatrix{{1, 0, 0}, {1, 0, 0}, {0, 0, 1}})), std::invalid_argument);
  EXPECT_THROW(analyze_dataflow(a, stt(kOs, {"m", "m", "k"})), std::invalid_argument);
  EXPECT_THROW(analyze_dataflow(a, stt(kOs, {"m", "n", "z"})), std::invalid_argument);
}

TEST(SttProperty, KernelIsExactAndNormalized) {
  gen::Rng rng(33);
  for (int trial = 0; trial < 2000; ++trial) {
    const IntMatrix t = gen::full_rank_stt(rng, -2, 2);
    const IntMatrix a = gen::access(rng, static_cast<std::size_t>(gen::uniform(rng, 1, 3)));
    const auto rs = reuse_space(a, stt(t));
    const std::size_t r = rank(RationalMatrix(a));
    ASSERT_EQ(static_cast<std::size_t>(rs.dimension), 3 - r);
    ASSERT_EQ(rs.basis.size(), 3 - r);
    for (const auto& v : rs.basis) {
      ASSERT_TRUE(annihilates(a, t, v)) << a << t;
      ASSERT_EQ(gcd_of(v), 1);
    }
    if (rs.dimension == 1) {
      const auto& v = rs.basis[0];
      ASSERT_TRUE(v[2] > 0 || (v[2] == 0 && (v[0] > 0 || (v[0] == 0 && v[1] > 0))));
    }
  }
}

TEST(SttProperty, ClassificationIgnoresBasisScaling) {
  gen::Rng rng(34);
  for (int trial = 0; trial < 1000; ++trial) {
    const IntMatrix t = gen::full_rank_stt(rng);
    const IntMatrix a = gen::access(rng, static_cast<std::size_t>(gen::uniform(rng, 1, 2)));
    const auto rs = reuse_space(a, stt(t));
    std::vector<std::vector<Rational>> scaled;
    for (const auto& v : rs.basis) {
      Rational s(gen::uniform(rng, 1, 7), gen::uniform(rng, 1, 7));
      if (gen::uniform(rng, 0, 1)) s = -s;
      scaled.push_back({s * v[0], s * v[1], s * v[2]});
    }
    if (scaled.size() == 2) {
      // Mix in a rational multiple of the other vector.
      const Rational m(gen::uniform(rng, -3, 3), gen::uniform(rng, 1, 3));
      for (std::size_t i = 0; i < 3; ++i) scaled[1][i] += m * scaled[0][i];
    }
    const auto again = canonical_reuse_space(scaled);
    ASSERT_EQ(again, rs) << a << t;
    for (auto role : {IoRole::Input, IoRole::Output})
      ASSERT_EQ(classify_dataflow(again, role), classify_dataflow(rs, role));
  }
}

TEST(SttProperty, KernelMatchesProjectorEigenspaceOnGemm) {
  // E - M^+ M projects onto ker M; its eigenvalue-1 eigenvectors are the
  // kernel. M^+ = M^T (M M^T)^-1 for the full-row-rank M = A T^-1.
  const auto a = parse_tensor_algebra("C[m,n] += A[m,k] * B[n,k]; m=4 n=4 k=4");
  const auto an = analyze_dataflow(a, stt(kOs));
  const double tinv[3][3] = {{1, 0, 0}, {0, 1, 0}, {-1, -1, 1}};
  for (const auto& ta : an.tensors) {
    double m[2][3] = {};
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < 3; ++k) m[r][c] += static_cast<double>(ta.restricted_access(r, k)) * tinv[k][c];
    double g[2][2] = {};
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t c = 0; c < 3; ++c) g[r][s] += m[r][c] * m[s][c];
    const double det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    const double gi[2][2] = {{g[1][1] / det, -g[0][1] / det}, {-g[1][0] / det, g[0][0] / det}};
    double proj[3][3];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double mpm = 0;
        for (std::size_t r = 0; r < 2; ++r)
          for (std::size_t s = 0; s < 2; ++s) mpm += m[r][i] * gi[r][s] * m[s][j];
        proj[i][j] = (i == j ? 1.0 : 0.0) - mpm;
      }
    ASSERT_EQ(ta.reuse.dimension, 1);
    const auto& v = ta.reuse.basis[0];
    for (std::size_t i = 0; i < 3; ++i) {
      double pv = 0;
      for (std::size_t j = 0; j < 3; ++j) pv += proj[i][j] * static_cast<double>(v[j]);
      EXPECT_NEAR(pv, static_cast<double>(v[i]), 1e-9) << ta.tensor;
    }
    double trace = proj[0][0] + proj[1][1] + proj[2][2];
    EXPECT_NEAR(trace, 1.0, 1e-9) << ta.tensor;
  }
}

TEST(Stt, IntegerKernelSpansRationalKernel) {
  gen::Rng rng(35);
  for (int trial = 0; trial < 500; ++trial) {
    const IntMatrix a = gen::matrix(rng, static_cast<std::size_t>(gen::uniform(rng, 1, 3)), 3, -2, 2);
    const auto k = integer_kernel(a);
    ASSERT_EQ(k.size(), nullspace(RationalMatrix(a)).size()) << a;
    for (const auto& v : k) {
      const auto r = a * std::span<const std::int64_t>(v);
      for (auto x : r) ASSERT_EQ(x, 0) << a;
    }
  }
}
