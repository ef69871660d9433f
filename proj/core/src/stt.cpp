#include "stgen/stt.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>

namespace stgen {

IntMatrix parse_stt_entries(const std::string& text) {
  IntMatrix t(3, 3);
  std::vector<std::int64_t> values;
  std::string token;
  std::size_t rows = 1;
  auto flush = [&] {
    if (token.empty()) return;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw std::invalid_argument("STT entry '" + token + "' is not an integer");
    values.push_back(v);
    token.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '[' || c == ']') {
      flush();
    } else if (c == ';') {
      flush();
      ++rows;
      if (values.size() != (rows - 1) * 3) throw std::invalid_argument("STT rows must have three entries");
    } else {
      token += c;
    }
  }
  flush();
  if (values.size() != 9) throw std::invalid_argument("STT matrix needs 9 entries, got " + std::to_string(values.size()));
  for (std::size_t i = 0; i < 9; ++i) t(i / 3, i % 3) = values[i];
  return t;
}

std::string format_stt_entries(const IntMatrix& t) {
  std::ostringstream os;
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (r) os << ';';
    for (std::size_t c = 0; c < t.cols(); ++c) os << (c ? "," : "") << t(r, c);
  }
  return os.str();
}

LegalityVerdict validate_stt(const SttMatrix& t) {
  LegalityVerdict v;
  v.determinant = determinant(t.entries);
  v.legal = v.determinant != 0;
  return v;
}

std::array<std::size_t, 3> resolve_selection(const TensorAlgebra& algebra, const SttMatrix& t) {
  std::array<std::size_t, 3> idx{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!algebra.has_iterator(t.selected_iterators[i]))
      throw std::invalid_argument("selected iterator '" + t.selected_iterators[i] + "' is not a loop of " +
                                  algebra.name);
    idx[i] = algebra.iterator_index(t.selected_iterators[i]);
  }
  if (idx[0] == idx[1] || idx[0] == idx[2] || idx[1] == idx[2])
    throw std::invalid_argument("selected iterators must be distinct");
  return idx;
}

SpaceTimePoint space_time_map(const SttMatrix& t, std::span<const std::int64_t> x) {
  const auto y = t.entries * x;
  return {{y[0], y[1]}, y[2]};
}

IntMatrix restrict_access(const TensorAccess& access, std::span<const std::size_t, 3> selected) {
  return access.access.select_columns(selected);
}

namespace {

/// dt > 0, or dt == 0 and first nonzero spatial entry > 0.
bool needs_flip(const Vec3& v) {
  if (v[2] != 0) return v[2] < 0;
  if (v[0] != 0) return v[0] < 0;
  return v[1] < 0;
}

Vec3 negate(const Vec3& v) { return {-v[0], -v[1], -v[2]}; }

Vec3 combine(std::int64_t a, const Vec3& x, std::int64_t b, const Vec3& y) {
  return {a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]};
}

Vec3 to_vec3(std::span<const std::int64_t> v) { return {v[0], v[1], v[2]}; }

/// A space-time lattice vector paired with its iteration-space preimage.
struct Paired {
  Vec3 st;
  Vec3 it;
};

Paired combine(std::int64_t a, const Paired& x, std::int64_t b, const Paired& y) {
  return {combine(a, x.st, b, y.st), combine(a, x.it, b, y.it)};
}

Paired normalized(Paired p) {
  if (needs_flip(p.st)) return {negate(p.st), negate(p.it)};
  return p;
}

/// Splits a 2-D lattice {x, y} into a dt == 0 generator and a companion with
/// the smallest positive dt, reduced modulo the generator.
std::pair<Paired, Paired> plane_basis(const Paired& x, const Paired& y) {
  const std::int64_t tx = x.st[2], ty = y.st[2];
  if (tx == 0 && ty == 0) return {normalized(x), normalized(y)};

  const auto [g, a, b] = extended_gcd(tx, ty);
  Paired flat = normalized(combine(ty / g, x, -tx / g, y));
  Paired comp = normalized(combine(a, x, b, y));

  const std::int64_t f0 = flat.st[0], f1 = flat.st[1];
  std::int64_t lo = 0, hi = 0;
  bool init = false;
  for (int i = 0; i < 2; ++i) {
    const std::int64_t f = i == 0 ? f0 : f1;
    if (f == 0) continue;
    const std::int64_t c = comp.st[i];
    const std::int64_t q0 = floor_div(c, f), q1 = ceil_div(c, f);
    lo = init ? std::min(lo, q0) : q0;
    hi = init ? std::max(hi, q1) : q1;
    init = true;
  }
  auto score = [](const Vec3& v) {
    const std::int64_t m = std::max(std::llabs(v[0]), std::llabs(v[1]));
    return std::array<std::int64_t, 4>{m, std::llabs(v[0]) + std::llabs(v[1]), v[0], v[1]};
  };
  Paired best = comp;
  for (std::int64_t lambda = lo - 1; lambda <= hi + 1; ++lambda) {
    Paired cand = combine(1, comp, -lambda, flat);
    if (score(cand.st) < score(best.st)) best = cand;
  }
  return {flat, best};
}

ReuseSpace plane_space(const std::vector<std::int64_t>& normal) {
  ReuseSpace rs;
  rs.dimension = 2;
  if (normal[0] == 0 && normal[1] == 0) {
    rs.basis = {{1, 0, 0}, {0, 1, 0}};
    return rs;
  }
  IntMatrix n(1, 3);
  for (int i = 0; i < 3; ++i) n(0, i) = normal[i];
  const auto k = integer_kernel(n);
  const Paired x{to_vec3(k[0]), {}}, y{to_vec3(k[1]), {}};
  const auto [flat, comp] = plane_basis(x, y);
  rs.basis = {flat.st, comp.st};
  return rs;
}

}  // namespace

ReuseSpace canonical_reuse_space(const std::vector<std::vector<Rational>>& spanning) {
  ReuseSpace rs;
  if (spanning.empty()) return rs;
  RationalMatrix rows(spanning.size(), 3);
  for (std::size_t r = 0; r < spanning.size(); ++r)
    for (std::size_t c = 0; c < 3; ++c) rows(r, c) = spanning[r].at(c);
  RationalMatrix reduced = rows;
  const auto pivots = rref(reduced);
  rs.dimension = static_cast<int>(pivots.size());
  if (rs.dimension == 0) return rs;
  if (rs.dimension == 3) {
    rs.basis = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    return rs;
  }
  if (rs.dimension == 1) {
    std::vector<Rational> row(3);
    for (std::size_t c = 0; c < 3; ++c) row[c] = reduced(0, c);
    Vec3 v = to_vec3(to_primitive(row));
    rs.basis = {needs_flip(v) ? negate(v) : v};
    return rs;
  }
  const auto normals = nullspace(reduced);
  return plane_space(to_primitive(normals.front()));
}

ReuseSpace reuse_space(const IntMatrix& restricted_access, const SttMatrix& t) {
  if (restricted_access.cols() != 3) throw std::invalid_argument("reuse_space: access must have 3 columns");
  const RationalMatrix m = RationalMatrix(restricted_access) * inverse(t.entries);
  return canonical_reuse_space(nullspace(m));
}

TensorDataflow classify_dataflow(const ReuseSpace& reuse, IoRole role) {
  TensorDataflow df;
  df.io_role = role;
  // Re-canonicalize so callers may pass any spanning set of the same space.
  std::vector<std::vector<Rational>> span;
  for (const auto& v : reuse.basis) span.push_back({Rational(v[0]), Rational(v[1]), Rational(v[2])});
  const ReuseSpace rs = canonical_reuse_space(span);
  df.direction = rs.basis;
  switch (rs.dimension) {
    case 0:
      df.kind = DataflowKind::Unicast;
      break;
    case 1: {
      const Vec3& v = rs.basis[0];
      const bool dp_zero = v[0] == 0 && v[1] == 0;
      if (dp_zero)
        df.kind = DataflowKind::Stationary;
      else if (v[2] != 0)
        df.kind = DataflowKind::Systolic;
      else
        df.kind = role == IoRole::Input ? DataflowKind::Multicast : DataflowKind::ReductionTree;
      break;
    }
    case 2: {
      df.kind = DataflowKind::Reuse2D;
      const Vec3& a = rs.basis[0];
      const Vec3& b = rs.basis[1];
      if (a[2] == 0 && b[2] == 0) {
        df.sub_kind = Reuse2DKind::Broadcast;
      } else {
        // (0,0,1) lies in the plane iff the normal a x b has no t component.
        const std::int64_t normal_t = a[0] * b[1] - a[1] * b[0];
        df.sub_kind = normal_t == 0 ? Reuse2DKind::MulticastStationary : Reuse2DKind::SystolicMulticast;
      }
      break;
    }
    default:
      df.kind = DataflowKind::Reuse2D;
      df.sub_kind = Reuse2DKind::Broadcast;
      df.degenerate = true;
      break;
  }
  return df;
}

char dataflow_letter(const TensorDataflow& df) {
  switch (df.kind) {
    case DataflowKind::Unicast: return 'U';
    case DataflowKind::Stationary: return 'T';
    case DataflowKind::Systolic: return 'S';
    case DataflowKind::Multicast:
    case DataflowKind::ReductionTree: return 'M';
    case DataflowKind::Reuse2D: return 'B';
  }
  return '?';
}

std::string to_string(DataflowKind kind) {
  switch (kind) {
    case DataflowKind::Unicast: return "Unicast";
    case DataflowKind::Stationary: return "Stationary";
    case DataflowKind::Systolic: return "Systolic";
    case DataflowKind::Multicast: return "Multicast";
    case DataflowKind::ReductionTree: return "ReductionTree";
    case DataflowKind::Reuse2D: return "Reuse2D";
  }
  return "?";
}

std::string to_string(Reuse2DKind kind) {
  switch (kind) {
    case Reuse2DKind::None: return "None";
    case Reuse2DKind::Broadcast: return "Broadcast";
    case Reuse2DKind::MulticastStationary: return "MulticastStationary";
    case Reuse2DKind::SystolicMulticast: return "SystolicMulticast";
  }
  return "?";
}

std::string to_string(IoRole role) { return role == IoRole::Input ? "Input" : "Output"; }

DataflowKind dataflow_kind_from_string(const std::string& s) {
  for (auto k : {DataflowKind::Unicast, DataflowKind::Stationary, DataflowKind::Systolic, DataflowKind::Multicast,
                 DataflowKind::ReductionTree, DataflowKind::Reuse2D})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown dataflow kind '" + s + "'");
}

Reuse2DKind reuse2d_kind_from_string(const std::string& s) {
  for (auto k : {Reuse2DKind::None, Reuse2DKind::Broadcast, Reuse2DKind::MulticastStationary,
                 Reuse2DKind::SystolicMulticast})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown 2-D reuse kind '" + s + "'");
}

std::vector<std::vector<std::int64_t>> integer_kernel(const IntMatrix& a) {
  const std::size_t n = a.cols();
  IntMatrix m = a;
  IntMatrix u = IntMatrix::identity(n);
  auto column_op = [&](std::size_t i, std::size_t j, std::int64_t p, std::int64_t q, std::int64_t r, std::int64_t s) {
    // [col_i, col_j] <- [p*col_i + q*col_j, r*col_i + s*col_j]
    for (IntMatrix* mat : {&m, &u})
      for (std::size_t row = 0; row < mat->rows(); ++row) {
        const std::int64_t ci = (*mat)(row, i), cj = (*mat)(row, j);
        (*mat)(row, i) = p * ci + q * cj;
        (*mat)(row, j) = r * ci + s * cj;
      }
  };
  std::size_t lead = 0;
  for (std::size_t r = 0; r < m.rows() && lead < n; ++r) {
    for (std::size_t c = lead + 1; c < n; ++c) {
      const std::int64_t x = m(r, lead), y = m(r, c);
      if (y == 0) continue;
      const auto [g, p, q] = extended_gcd(x, y);
      column_op(lead, c, p, q, -y / g, x / g);
    }
    if (m(r, lead) != 0) ++lead;
  }
  std::vector<std::vector<std::int64_t>> basis;
  for (std::size_t c = lead; c < n; ++c) {
    std::vector<std::int64_t> v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = u(r, c);
    basis.push_back(std::move(v));
  }
  return basis;
}

ReuseLattice reuse_lattice(const IntMatrix& restricted_access, const SttMatrix& t) {
  ReuseLattice lat;
  const auto kernel = integer_kernel(restricted_access);
  lat.dimension = static_cast<int>(kernel.size());
  auto pair_of = [&](const std::vector<std::int64_t>& u) {
    return Paired{to_vec3(t.entries * u), to_vec3(u)};
  };
  if (lat.dimension == 1) {
    const Paired p = normalized(pair_of(kernel[0]));
    lat.steps = {p.st};
    lat.iteration_steps = {p.it};
  } else if (lat.dimension == 2) {
    const auto [flat, comp] = plane_basis(pair_of(kernel[0]), pair_of(kernel[1]));
    lat.steps = {flat.st, comp.st};
    lat.iteration_steps = {flat.it, comp.it};
  }
  return lat;
}

std::string dataflow_name(const TensorAlgebra& algebra, const SttMatrix& t, std::span<const TensorDataflow> flows) {
  (void)algebra;
  std::string name;
  for (const auto& it : t.selected_iterators)
    for (char c : it) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  name += '-';
  for (const auto& f : flows) name += dataflow_letter(f);
  return name;
}

DataflowAnalysis analyze_dataflow(const TensorAlgebra& algebra, const SttMatrix& t) {
  DataflowAnalysis out;
  out.stt = t;
  const auto sel = resolve_selection(algebra, t);
  out.verdict = validate_stt(t);
  if (!out.verdict) throw std::invalid_argument("STT matrix is singular (det = 0)");
  std::vector<TensorDataflow> flows;
  for (const auto* acc : algebra.tensors()) {
    TensorAnalysis ta;
    ta.tensor = acc->tensor;
    ta.role = acc == &algebra.output ? IoRole::Output : IoRole::Input;
    ta.restricted_access = restrict_access(*acc, sel);
    ta.reuse = reuse_space(ta.restricted_access, t);
    ta.dataflow = classify_dataflow(ta.reuse, ta.role);
    ta.lattice = reuse_lattice(ta.restricted_access, t);
    flows.push_back(ta.dataflow);
    out.tensors.push_back(std::move(ta));
  }
  out.name = dataflow_name(algebra, t, flows);
  return out;
}

}  // namespace stgen
