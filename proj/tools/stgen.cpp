// stgen: analyze, generate, simulate and explore space-time mapped tensor
// accelerators.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stgen/algebra.hpp"
#include "stgen/arch.hpp"
#include "stgen/arch_json.hpp"
#include "stgen/config.hpp"
#include "stgen/dse.hpp"
#include "stgen/reference.hpp"
#include "stgen/sim.hpp"
#include "stgen/stt.hpp"
#include "stgen/tensor_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace stgen;

namespace {

enum Exit : int { kOk = 0, kInput = 1, kSingular = 2, kUnsupported = 3, kMismatch = 4, kFault = 5 };

struct CliError : std::runtime_error {
  CliError(const std::string& what, int code) : std::runtime_error(what), code(code) {}
  int code;
};

struct Flags {
  std::string config;
  std::string algebra;
  std::string stt;
  std::string select;
  std::string array;
  std::string tile;
  std::string in;
  std::string arch;
  std::string out;
  std::string trace;
  std::string save_output;
  std::string dtype;
  std::string alphabet;
  std::vector<std::string> tensors;
  std::int64_t bw = -1;
  std::int64_t seed = -1;
  std::int64_t workers = -1;
  std::int64_t top = -1;
  bool text = false;
};

std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream is(path);
  if (!is) throw CliError("cannot read " + path, kInput);
  return {std::istreambuf_iterator<char>(is), {}};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw CliError("cannot write " + path, kInput);
  os << text;
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || p == "-" || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

// Config file first, command-line flags on top.
RunConfig run_config(const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    try {
      c = load_run_config(f.config);
    } catch (const std::exception& e) {
      throw CliError(e.what(), kInput);
    }
    const fs::path base = fs::path(f.config).parent_path();
    c.algebra_path = resolve(base, c.algebra_path);
    c.arch_path = resolve(base, c.arch_path);
    c.out_path = resolve(base, c.out_path);
    c.trace_path = resolve(base, c.trace_path);
    for (auto& [name, p] : c.tensor_paths) p = resolve(base, p);
  }
  if (!f.algebra.empty()) c.algebra_path = f.algebra;
  if (!f.arch.empty()) c.arch_path = f.arch;
  if (!f.out.empty()) c.out_path = f.out;
  if (!f.trace.empty()) c.trace_path = f.trace;
  if (!f.array.empty()) c.array = parse_array_dims(f.array);
  if (f.bw >= 0) c.bandwidth_cap = f.bw;
  if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
  if (f.workers > 0) c.workers = static_cast<std::size_t>(f.workers);
  if (f.top >= 0) c.simulate_top = static_cast<std::size_t>(f.top);
  if (!f.dtype.empty()) c.dtype = dtype_from_string(f.dtype);
  if (!f.alphabet.empty()) c.alphabet = parse_int_list(f.alphabet);
  for (const auto& spec : f.tensors) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw CliError("--tensor expects NAME=PATH, got " + spec, kInput);
    c.tensor_paths[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  return c;
}

TensorAlgebra load_algebra(const std::string& path) {
  if (path.empty()) throw CliError("no algebra given (--algebra PATH)", kInput);
  try {
    if (path == "-") return parse_tensor_algebra(read_text(path));
    return load_tensor_algebra(path);
  } catch (const ParseError& e) {
    throw CliError(path + ":" + std::string(e.what()), kInput);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
}

std::array<std::string, 3> parse_selection(const std::string& text, const TensorAlgebra& algebra) {
  std::array<std::string, 3> sel;
  if (text.empty()) {
    if (algebra.num_iterators() < 3) throw CliError("algebra has fewer than three iterators", kInput);
    for (std::size_t i = 0; i < 3; ++i) sel[i] = algebra.iterators[i].name;
    return sel;
  }
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 3) throw CliError("--select expects three iterators", kInput);
    sel[n++] = item;
  }
  if (n != 3) throw CliError("--select expects three iterators", kInput);
  return sel;
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

std::string vec_text(const Vec3& v) { return to_string(v); }

std::string modules_text(const std::vector<PeModuleKind>& mods) {
  std::string s;
  for (auto m : mods) s += module_letter(m);
  return s;
}

std::string kind_text(const TensorDataflow& df) {
  std::string s = to_string(df.kind);
  if (df.kind == DataflowKind::Reuse2D) s += ":" + to_string(df.sub_kind);
  return s;
}

json analysis_json(const TensorAlgebra& algebra, const DataflowAnalysis& a) {
  json j;
  j["algebra"] = to_string(algebra);
  j["selection"] = a.stt.selected_iterators;
  j["stt"] = format_stt_entries(a.stt.entries);
  j["determinant"] = static_cast<std::int64_t>(a.verdict.determinant);
  j["legal"] = a.verdict.legal;
  bool adjacent = true;
  try {
    check_adjacency(a);
  } catch (const UnsupportedDesign&) {
    adjacent = false;
  }
  j["adjacent"] = adjacent;
  j["name"] = a.name;
  json tensors = json::array();
  for (const auto& t : a.tensors) {
    json e;
    e["tensor"] = t.tensor;
    e["role"] = to_string(t.role);
    e["kind"] = to_string(t.dataflow.kind);
    if (t.dataflow.kind == DataflowKind::Reuse2D) e["sub_kind"] = to_string(t.dataflow.sub_kind);
    e["letter"] = std::string(1, dataflow_letter(t.dataflow));
    e["reuse_dimension"] = t.reuse.dimension;
    json basis = json::array();
    for (const auto& v : t.reuse.basis) basis.push_back(vec_json(v));
    e["basis"] = basis;
    std::string mods;
    try {
      mods = modules_text(select_pe_module(t.dataflow));
    } catch (const ContractViolation&) {
    }
    e["modules"] = mods;
    tensors.push_back(e);
  }
  j["tensors"] = tensors;
  return j;
}

std::string analysis_text(const DataflowAnalysis& a) {
  std::ostringstream os;
  for (const auto& t : a.tensors) {
    os << t.tensor << ": " << kind_text(t.dataflow);
    for (const auto& v : t.reuse.basis) os << ' ' << vec_text(v);
    os << "; ";
  }
  os << "name " << a.name << '\n';
  return os.str();
}

DataflowAnalysis run_analysis(const TensorAlgebra& algebra, const SttMatrix& t) {
  const auto verdict = validate_stt(t);
  if (!verdict.legal)
    throw CliError("singular STT matrix " + format_stt_entries(t.entries) + ": determinant " +
                       verdict.determinant.str(),
                   kSingular);
  try {
    return analyze_dataflow(algebra, t);
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
}

SttMatrix stt_from_flags(const Flags& f, const TensorAlgebra& algebra) {
  if (f.stt.empty()) throw CliError("no STT matrix given (--stt \"r0;r1;r2\")", kInput);
  SttMatrix t;
  try {
    t.entries = parse_stt_entries(f.stt);
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
  t.selected_iterators = parse_selection(f.select, algebra);
  return t;
}

int cmd_analyze(const Flags& f) {
  const RunConfig c = run_config(f);
  const TensorAlgebra algebra = load_algebra(c.algebra_path);
  const SttMatrix t = stt_from_flags(f, algebra);
  const DataflowAnalysis a = run_analysis(algebra, t);
  emit(c.out_path, f.text ? analysis_text(a) : analysis_json(algebra, a).dump(2) + "\n");
  return kOk;
}

std::array<std::int64_t, 3> parse_tile(const std::string& text) {
  const auto v = parse_int_list(text);
  if (v.size() != 3) throw CliError("--tile expects three sizes", kInput);
  return {v[0], v[1], v[2]};
}

int cmd_generate(const Flags& f) {
  const RunConfig c = run_config(f);
  TensorAlgebra algebra;
  SttMatrix t;
  if (!f.in.empty()) {
    json j;
    try {
      j = json::parse(read_text(f.in));
      algebra = parse_tensor_algebra(j.at("algebra").get<std::string>());
      t.entries = parse_stt_entries(j.at("stt").get<std::string>());
      t.selected_iterators = j.at("selection").get<std::array<std::string, 3>>();
    } catch (const CliError&) {
      throw;
    } catch (const std::exception& e) {
      throw CliError("bad analysis input: " + std::string(e.what()), kInput);
    }
  } else {
    algebra = load_algebra(c.algebra_path);
    t = stt_from_flags(f, algebra);
  }
  run_analysis(algebra, t);
  GenerateOptions opt;
  opt.tiling.array = c.array;
  opt.tiling.time_budget = c.time_budget;
  if (!f.tile.empty()) opt.tiling.fixed_tile = parse_tile(f.tile);
  ArchSpec arch;
  try {
    arch = generate_arch(algebra, t, opt);
  } catch (const UnsupportedDesign& e) {
    throw CliError(e.what(), kUnsupported);
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
  if (f.text) {
    std::ostringstream os;
    os << "array " << to_string(arch.array) << ", tile " << format_tile(arch.stages.tile) << ", replicas "
       << arch.stages.replicas << ", stages " << arch.stages.stage_count << '\n';
    for (const auto& p : arch.pe_modules)
      os << p.tensor << ": " << kind_text(p.dataflow) << ", modules " << modules_text(p.modules) << '\n';
    os << arch.links.size() << " links, " << arch.multicast_groups.size() << " multicast groups, "
       << arch.reduction_trees.size() << " reduction trees, " << arch.banks.size() << " banks\n";
    emit(c.out_path, os.str());
  } else {
    emit(c.out_path, arch_to_json(arch));
  }
  return kOk;
}

template <typename T>
bool outputs_match(const Tensor<T>& got, const Tensor<T>& want) {
  if constexpr (std::is_integral_v<T>) {
    return got == want;
  } else {
    if (got.extents() != want.extents()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double a = got.data()[i], b = want.data()[i];
      if (std::abs(a - b) > 1e-6 * std::max({1.0, std::abs(a), std::abs(b)})) return false;
    }
    return true;
  }
}

template <typename T>
TensorMap<T> gather_inputs(const TensorAlgebra& algebra, const RunConfig& c) {
  TensorMap<T> inputs;
  if constexpr (std::is_integral_v<T>)
    inputs = random_int_inputs(algebra, c.seed);
  else
    inputs = random_real_inputs(algebra, c.seed);
  for (const auto& [name, path] : c.tensor_paths) {
    if (!inputs.count(name)) throw CliError("no input tensor named " + name, kInput);
    try {
      inputs[name] = convert_tensor<T>(load_any_tensor(path));
    } catch (const std::exception& e) {
      throw CliError(path + ": " + e.what(), kInput);
    }
  }
  return inputs;
}

std::string trace_csv(const SimTrace& trace) {
  std::ostringstream os;
  os << "cycle";
  for (const auto& t : trace.tensors) os << ',' << t;
  os << '\n';
  for (std::size_t cyc = 0; cyc < trace.transfers.size(); ++cyc) {
    os << cyc;
    for (auto v : trace.transfers[cyc]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

template <typename T>
int run_simulation(const ArchSpec& arch, const TensorAlgebra& algebra, const RunConfig& c, const Flags& f) {
  const TensorMap<T> inputs = gather_inputs<T>(algebra, c);
  SimOptions so;
  so.bandwidth_cap = c.bandwidth_cap;
  SimReport<T> rep;
  try {
    rep = simulate(arch, inputs, so);
  } catch (const SimFault& e) {
    throw CliError("fault at cycle " + std::to_string(e.cycle()) + ": " + e.what(), kFault);
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
  const bool match = outputs_match(rep.output, reference_execute(algebra, inputs));

  json j;
  j["dtype"] = to_string(c.dtype);
  j["seed"] = c.seed;
  j["bandwidth_cap"] = c.bandwidth_cap;
  j["total_cycles"] = rep.total_cycles;
  j["compute_cycles"] = rep.compute_cycles;
  j["fill_drain_cycles"] = rep.fill_drain_cycles;
  j["stall_cycles"] = rep.stall_cycles;
  j["macs"] = rep.macs;
  j["stages"] = rep.stages;
  j["spatial_utilization"] = rep.spatial_utilization;
  json bw = json::array();
  for (const auto& b : rep.bandwidth)
    bw.push_back({{"tensor", b.tensor}, {"peak", b.peak}, {"average", b.average}, {"total", b.total}});
  j["bandwidth"] = bw;
  T checksum{};
  for (const auto& v : rep.output.data()) checksum += v;
  j["output"] = {{"tensor", algebra.output.tensor}, {"extents", rep.output.extents()}, {"checksum", checksum}};
  j["matches_reference"] = match;

  if (!c.trace_path.empty()) emit(c.trace_path, trace_csv(rep.trace));
  if (!f.save_output.empty()) save_tensor(f.save_output, rep.output);
  if (f.text) {
    std::ostringstream os;
    os << "cycles " << rep.total_cycles << " (compute " << rep.compute_cycles << ", fill/drain "
       << rep.fill_drain_cycles << ", stall " << rep.stall_cycles << "), utilization " << rep.spatial_utilization
       << '\n';
    for (const auto& b : rep.bandwidth)
      os << b.tensor << ": peak " << b.peak << ", average " << b.average << ", total " << b.total << '\n';
    os << (match ? "output matches reference\n" : "output DIFFERS from reference\n");
    emit(c.out_path, os.str());
  } else {
    emit(c.out_path, j.dump(2) + "\n");
  }
  return match ? kOk : kMismatch;
}

int cmd_simulate(const Flags& f) {
  const RunConfig c = run_config(f);
  const std::string src = !f.in.empty() ? f.in : c.arch_path;
  if (src.empty()) throw CliError("no architecture given (--arch PATH or --in PATH)", kInput);
  ArchSpec arch;
  TensorAlgebra algebra;
  try {
    arch = arch_from_json(read_text(src));
    algebra = arch_algebra(arch);
  } catch (const CliError&) {
    throw;
  } catch (const std::exception& e) {
    throw CliError(src + ": " + e.what(), kInput);
  }
  if (c.dtype == DType::Float64) return run_simulation<double>(arch, algebra, c, f);
  return run_simulation<std::int64_t>(arch, algebra, c, f);
}

int cmd_explore(const Flags& f) {
  const RunConfig c = run_config(f);
  const TensorAlgebra algebra = load_algebra(c.algebra_path);
  ExploreOptions opt;
  opt.enumerate.array = c.array;
  opt.enumerate.alphabet = c.alphabet;
  opt.enumerate.time_budget = c.time_budget;
  opt.enumerate.workers = c.workers;
  opt.bandwidth_cap = c.bandwidth_cap;
  opt.weights = c.weights;
  opt.simulate_top = c.simulate_top;
  opt.seed = c.seed;
  ExploreResult r;
  try {
    r = explore(algebra, opt);
  } catch (const std::exception& e) {
    throw CliError(e.what(), kInput);
  }
  if (!c.out_path.empty()) emit(c.out_path, explore_csv(r));

  std::set<std::string> families;
  for (const auto& p : r.points) families.insert(family_code(p));
  if (f.text) {
    std::ostringstream os;
    os << "status " << r.status << ", " << r.points.size() << " design points, " << r.families << " families\n";
    for (auto i : r.pareto)
      os << "pareto " << r.points[i].name << " [" << format_stt_entries(r.points[i].stt) << "] cycles "
         << r.costs[i].est_cycles << " area " << r.costs[i].area_proxy << " energy " << r.costs[i].energy_proxy
         << '\n';
    std::cout << os.str();
  } else {
    json j;
    j["status"] = r.status;
    j["algebra"] = to_string(algebra);
    j["array"] = to_string(c.array);
    j["bandwidth_cap"] = c.bandwidth_cap;
    j["points"] = r.points.size();
    j["families"] = r.families;
    j["family_codes"] = families;
    json front = json::array();
    for (auto i : r.pareto) {
      const auto& p = r.points[i];
      const auto& k = r.costs[i];
      json e{{"name", p.name},
             {"stt", format_stt_entries(p.stt)},
             {"tile", format_tile(p.tile)},
             {"est_cycles", k.est_cycles},
             {"area_proxy", k.area_proxy},
             {"energy_proxy", k.energy_proxy}};
      if (k.sim_cycles) e["sim_cycles"] = *k.sim_cycles;
      front.push_back(e);
    }
    j["pareto"] = front;
    std::cout << j.dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time transformation accelerator generator"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "TOML-style run configuration");
    sub->add_option("--out", f.out, "Output path (default stdout)");
    sub->add_flag("--text", f.text, "Human-readable output instead of JSON");
  };
  auto algebra_opts = [&f](CLI::App* sub) {
    sub->add_option("--algebra", f.algebra, "Tensor algebra file (.ta), '-' for stdin");
    sub->add_option("--array", f.array, "PE array, e.g. 16x16");
  };
  auto stt_opts = [&f](CLI::App* sub) {
    sub->add_option("--stt", f.stt, "Space-time matrix rows, e.g. \"1,0,0;0,1,0;1,1,1\"");
    sub->add_option("--select", f.select, "Three loop iterators, e.g. m,n,k");
  };

  auto* analyze = app.add_subcommand("analyze", "Classify the dataflow of every tensor under one STT matrix");
  common(analyze);
  algebra_opts(analyze);
  stt_opts(analyze);

  auto* generate = app.add_subcommand("generate", "Generate the architecture description (JSON)");
  common(generate);
  algebra_opts(generate);
  stt_opts(generate);
  generate->add_option("--in", f.in, "Analysis JSON from 'analyze', '-' for stdin");
  generate->add_option("--tile", f.tile, "Fixed tile sizes of the selected loops, e.g. 4,4,4");

  auto* simulate_cmd = app.add_subcommand("simulate", "Cycle-accurate simulation against the reference loop nest");
  common(simulate_cmd);
  simulate_cmd->add_option("--arch", f.arch, "Architecture JSON from 'generate'");
  simulate_cmd->add_option("--in", f.in, "Same as --arch, '-' for stdin");
  simulate_cmd->add_option("--tensor", f.tensors, "Input tensor NAME=PATH (binary or .csv); others are random");
  simulate_cmd->add_option("--bw", f.bw, "Bank transfers per tensor per cycle (0 = unlimited)");
  simulate_cmd->add_option("--seed", f.seed, "Seed for random input tensors");
  simulate_cmd->add_option("--dtype", f.dtype, "int64 or float64");
  simulate_cmd->add_option("--trace", f.trace, "Write per-cycle bank transfers (CSV) to this path");
  simulate_cmd->add_option("--save-output", f.save_output, "Write the output tensor (binary) to this path");

  auto* explore_cmd = app.add_subcommand("explore", "Enumerate and rank all legal design points");
  common(explore_cmd);
  algebra_opts(explore_cmd);
  explore_cmd->add_option("--bw", f.bw, "Bank transfers per tensor per cycle (0 = unlimited)");
  explore_cmd->add_option("--seed", f.seed, "Seed for simulated points");
  explore_cmd->add_option("--alphabet", f.alphabet, "STT entry values, e.g. -1,0,1");
  explore_cmd->add_option("--workers", f.workers, "Worker threads");
  explore_cmd->add_option("--top", f.top, "Simulate the N fastest estimated points");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) return cmd_analyze(f);
    if (generate->parsed()) return cmd_generate(f);
    if (simulate_cmd->parsed()) return cmd_simulate(f);
    return cmd_explore(f);
  } catch (const CliError& e) {
    std::cerr << "stgen: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "stgen: " << e.what() << '\n';
    return kInput;
  }
}
