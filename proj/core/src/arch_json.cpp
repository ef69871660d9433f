#include "stgen/arch_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace stgen {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
Vec3 vec3(const json& j) { return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>(), j.at(2).get<std::int64_t>()}; }

json pe(const PeCoord& p) { return json::array({p.row, p.col}); }
PeCoord pe_of(const json& j) { return {j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>()}; }

json pes(const std::vector<PeCoord>& v) {
  json a = json::array();
  for (const auto& p : v) a.push_back(pe(p));
  return a;
}
std::vector<PeCoord> pes_of(const json& j) {
  std::vector<PeCoord> v;
  for (const auto& p : j) v.push_back(pe_of(p));
  return v;
}

json matrix(const IntMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

IntMatrix matrix_of(const json& j, std::size_t cols_if_empty = 0) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j.at(0).size() : cols_if_empty;
  IntMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw std::invalid_argument("ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<std::int64_t>();
  }
  return m;
}

json dataflow(const TensorDataflow& df) {
  json d{{"kind", to_string(df.kind)}, {"sub_kind", to_string(df.sub_kind)}, {"io_role", to_string(df.io_role)},
         {"degenerate", df.degenerate}};
  d["direction"] = json::array();
  for (const auto& v : df.direction) d["direction"].push_back(vec(v));
  d["letter"] = std::string(1, dataflow_letter(df));
  return d;
}

TensorDataflow dataflow_of(const json& j) {
  TensorDataflow df;
  df.kind = dataflow_kind_from_string(j.at("kind"));
  df.sub_kind = reuse2d_kind_from_string(j.at("sub_kind"));
  df.io_role = j.at("io_role").get<std::string>() == "Output" ? IoRole::Output : IoRole::Input;
  df.degenerate = j.value("degenerate", false);
  for (const auto& v : j.at("direction")) df.direction.push_back(vec3(v));
  return df;
}

json stage_loop(const StageLoop& l) {
  return {{"iterator", l.iterator}, {"name", l.name}, {"bound", l.bound},
          {"step", l.step},         {"trip", l.trip}, {"role", to_string(l.role)}};
}

StageLoop stage_loop_of(const json& j) {
  StageLoop l;
  l.iterator = j.at("iterator");
  l.name = j.at("name");
  l.bound = j.at("bound");
  l.step = j.at("step");
  l.trip = j.at("trip");
  l.role = loop_role_from_string(j.at("role"));
  return l;
}

}  // namespace

std::string arch_to_json(const ArchSpec& a) {
  json j;
  j["array"] = {{"rows", a.array.rows}, {"cols", a.array.cols}};

  j["pe_modules"] = json::array();
  for (const auto& t : a.pe_modules) {
    json m;
    m["tensor"] = t.tensor;
    m["role"] = to_string(t.role);
    m["modules"] = json::array();
    for (auto k : t.modules) m["modules"].push_back(std::string(1, module_letter(k)));
    m["module_names"] = json::array();
    for (auto k : t.modules) m["module_names"].push_back(to_string(k));
    m["dataflow"] = dataflow(t.dataflow);
    json lat{{"dimension", t.lattice.dimension}, {"steps", json::array()}, {"iteration_steps", json::array()}};
    for (const auto& v : t.lattice.steps) lat["steps"].push_back(vec(v));
    for (const auto& v : t.lattice.iteration_steps) lat["iteration_steps"].push_back(vec(v));
    m["lattice"] = lat;
    m["access"] = matrix(t.access);
    m["offsets"] = t.offsets;
    m["extents"] = t.extents;
    j["pe_modules"].push_back(m);
  }

  j["links"] = json::array();
  for (const auto& l : a.links)
    j["links"].push_back({{"tensor", l.tensor}, {"src", pe(l.src)}, {"dst", pe(l.dst)}, {"delay", l.delay}});

  j["multicast_groups"] = json::array();
  for (const auto& g : a.multicast_groups)
    j["multicast_groups"].push_back({{"tensor", g.tensor},
                                     {"bank", g.bank},
                                     {"replica", g.replica},
                                     {"members", pes(g.members)},
                                     {"diagonal", g.diagonal}});

  j["reduction_trees"] = json::array();
  for (const auto& t : a.reduction_trees)
    j["reduction_trees"].push_back({{"tensor", t.tensor},
                                    {"bank", t.bank},
                                    {"replica", t.replica},
                                    {"members", pes(t.members)},
                                    {"arity", t.arity},
                                    {"depth", t.depth}});

  j["banks"] = json::array();
  for (const auto& b : a.banks) {
    json s{{"space_time", matrix(b.stream.space_time)},
           {"denominator", b.stream.denominator},
           {"origin", json::array({b.stream.origin[0], b.stream.origin[1], b.stream.origin[2]})},
           {"sequential", matrix(b.stream.sequential)},
           {"offsets", b.stream.offsets}};
    j["banks"].push_back({{"tensor", b.tensor},
                          {"id", b.id},
                          {"role", to_string(b.role)},
                          {"replica", b.replica},
                          {"pes", pes(b.pes)},
                          {"stream", s}});
  }

  const auto& s = a.stages;
  json st;
  st["selection"] = s.selection;
  st["stt"] = matrix(s.stt);
  st["adjugate"] = matrix(s.adjugate);
  st["determinant"] = s.determinant;
  st["origin"] = s.origin;
  st["tile"] = s.tile;
  st["extent"] = s.extent;
  st["time_extent"] = s.time_extent;
  st["nest"] = json::array();
  for (const auto& l : s.nest) st["nest"].push_back(stage_loop(l));
  st["stage_count"] = s.stage_count;
  st["replicas"] = s.replicas;
  st["replica_origins"] = pes(s.replica_origins);
  st["compute_cycles_per_stage"] = s.compute_cycles_per_stage;
  st["fill_drain_cycles"] = s.fill_drain_cycles;
  st["drain_latency"] = s.drain_latency;
  st["cycles_per_stage"] = s.cycles_per_stage;
  st["occupied_pes"] = s.occupied_pes;
  st["events"] = json::array();
  for (const auto& e : s.events)
    st["events"].push_back({{"kind", e.kind},
                            {"tensor", e.tensor},
                            {"when", e.when},
                            {"window", e.window},
                            {"double_buffered", e.double_buffered}});
  j["stages"] = st;

  j["compute_cell"] = {{"operands", a.compute_cell.operands},
                       {"accumulate", a.compute_cell.accumulate},
                       {"statement", a.compute_cell.statement}};
  return j.dump(2) + "\n";
}

ArchSpec arch_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("architecture JSON: ") + e.what());
  }
  try {
    ArchSpec a;
    a.array.rows = j.at("array").at("rows");
    a.array.cols = j.at("array").at("cols");
    for (const auto& m : j.at("pe_modules")) {
      TensorPlan t;
      t.tensor = m.at("tensor");
      t.role = m.at("role").get<std::string>() == "Output" ? IoRole::Output : IoRole::Input;
      for (const auto& k : m.at("modules")) t.modules.push_back(module_from_letter(k.get<std::string>().at(0)));
      t.dataflow = dataflow_of(m.at("dataflow"));
      const auto& lat = m.at("lattice");
      t.lattice.dimension = lat.at("dimension");
      for (const auto& v : lat.at("steps")) t.lattice.steps.push_back(vec3(v));
      for (const auto& v : lat.at("iteration_steps")) t.lattice.iteration_steps.push_back(vec3(v));
      t.access = matrix_of(m.at("access"));
      t.offsets = m.at("offsets").get<std::vector<std::int64_t>>();
      t.extents = m.at("extents").get<std::vector<std::int64_t>>();
      a.pe_modules.push_back(std::move(t));
    }
    for (const auto& l : j.at("links"))
      a.links.push_back({l.at("tensor"), pe_of(l.at("src")), pe_of(l.at("dst")), l.at("delay")});
    for (const auto& g : j.at("multicast_groups"))
      a.multicast_groups.push_back({g.at("tensor"), g.at("bank"), g.value("replica", std::int64_t{0}),
                                    pes_of(g.at("members")), g.value("diagonal", false)});
    for (const auto& t : j.at("reduction_trees"))
      a.reduction_trees.push_back({t.at("tensor"), t.at("bank"), t.value("replica", std::int64_t{0}),
                                   pes_of(t.at("members")), t.value("arity", std::int64_t{2}), t.at("depth")});
    for (const auto& b : j.at("banks")) {
      BankDescriptor d;
      d.tensor = b.at("tensor");
      d.id = b.at("id");
      d.role = bank_role_from_string(b.at("role"));
      d.replica = b.value("replica", std::int64_t{0});
      d.pes = pes_of(b.at("pes"));
      const auto& s = b.at("stream");
      d.stream.space_time = matrix_of(s.at("space_time"), 3);
      d.stream.denominator = s.at("denominator");
      d.stream.origin = s.at("origin").get<std::array<std::int64_t, 3>>();
      d.stream.sequential = matrix_of(s.at("sequential"));
      d.stream.offsets = s.at("offsets").get<std::vector<std::int64_t>>();
      a.banks.push_back(std::move(d));
    }
    const auto& st = j.at("stages");
    auto& s = a.stages;
    s.selection = st.at("selection").get<std::array<std::string, 3>>();
    s.stt = matrix_of(st.at("stt"));
    s.adjugate = matrix_of(st.at("adjugate"));
    s.determinant = st.at("determinant");
    s.origin = st.at("origin").get<std::array<std::int64_t, 3>>();
    s.tile = st.at("tile").get<std::array<std::int64_t, 3>>();
    s.extent = st.at("extent").get<std::array<std::int64_t, 2>>();
    s.time_extent = st.at("time_extent");
    for (const auto& l : st.at("nest")) s.nest.push_back(stage_loop_of(l));
    s.stage_count = st.at("stage_count");
    s.replicas = st.at("replicas");
    s.replica_origins = pes_of(st.at("replica_origins"));
    s.compute_cycles_per_stage = st.at("compute_cycles_per_stage");
    s.fill_drain_cycles = st.at("fill_drain_cycles");
    s.drain_latency = st.at("drain_latency");
    s.cycles_per_stage = st.at("cycles_per_stage");
    s.occupied_pes = st.at("occupied_pes");
    for (const auto& e : st.at("events"))
      s.events.push_back({e.at("kind"), e.at("tensor"), e.at("when"), e.at("window"), e.at("double_buffered")});
    if (s.stt.rows() != 3 || s.stt.cols() != 3 || s.adjugate.rows() != 3 || s.adjugate.cols() != 3)
      throw std::invalid_argument("stages.stt and stages.adjugate must be 3x3");
    if (s.determinant == 0) throw std::invalid_argument("stages.determinant must be nonzero");
    if (static_cast<std::int64_t>(s.replica_origins.size()) != s.replicas)
      throw std::invalid_argument("stages.replica_origins must list one origin per replica");
    const auto& c = j.at("compute_cell");
    a.compute_cell.operands = c.at("operands");
    a.compute_cell.accumulate = c.at("accumulate");
    a.compute_cell.statement = c.at("statement");
    return a;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("architecture JSON: ") + e.what());
  }
}

void save_arch(const std::string& path, const ArchSpec& arch) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << arch_to_json(arch);
}

ArchSpec load_arch(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return arch_from_json(ss.str());
}

}  // namespace stgen
