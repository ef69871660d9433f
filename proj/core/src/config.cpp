#include "stgen/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stgen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) return v.substr(1, v.size() - 2);
  return v;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config key '" + key + "' expects a number, got '" + v + "'");
}

}  // namespace

std::vector<std::int64_t> parse_int_list(const std::string& text) {
  std::string s = trim(text);
  if (!s.empty() && s.front() == '[') s = s.substr(1);
  if (!s.empty() && s.back() == ']') s.pop_back();
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  std::vector<std::int64_t> out;
  std::string tok;
  while (is >> tok) out.push_back(to_int("list", tok));
  return out;
}

ConfigTable parse_config(const std::string& text) {
  ConfigTable table;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' || line[i] == '\'') {
        if (quote == 0)
          quote = line[i];
        else if (quote == line[i])
          quote = 0;
      }
      if (line[i] == '#' && quote == 0) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    table[section.empty() ? key : section + "." + key] = unquote(trim(line.substr(eq + 1)));
  }
  return table;
}

ConfigTable load_config_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

RunConfig apply_config(const ConfigTable& table, RunConfig c) {
  const std::map<std::string, double CostWeights::*> weights{
      {"area.stationary", &CostWeights::stationary},
      {"area.systolic", &CostWeights::systolic},
      {"area.pass", &CostWeights::pass},
      {"area.link", &CostWeights::link},
      {"area.multicast_member", &CostWeights::multicast_member},
      {"area.tree_adder", &CostWeights::tree_adder},
      {"area.bank", &CostWeights::bank},
      {"energy.mac", &CostWeights::mac},
      {"energy.hop", &CostWeights::hop},
      {"energy.multicast_delivery", &CostWeights::multicast_delivery},
      {"energy.tree_add", &CostWeights::tree_add},
      {"energy.bank_access", &CostWeights::bank_access},
      {"energy.stationary_load", &CostWeights::stationary_load},
  };
  for (const auto& [key, v] : table) {
    if (key == "array") c.array = parse_array_dims(v);
    else if (key == "bandwidth_cap" || key == "bw") c.bandwidth_cap = to_int(key, v);
    else if (key == "dtype") c.dtype = dtype_from_string(v);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "alphabet") c.alphabet = parse_int_list(v);
    else if (key == "time_budget") c.time_budget = to_int(key, v);
    else if (key == "workers") c.workers = static_cast<std::size_t>(std::max<std::int64_t>(1, to_int(key, v)));
    else if (key == "simulate_top") c.simulate_top = static_cast<std::size_t>(std::max<std::int64_t>(0, to_int(key, v)));
    else if (key == "paths.algebra") c.algebra_path = v;
    else if (key == "paths.arch") c.arch_path = v;
    else if (key == "paths.out") c.out_path = v;
    else if (key == "paths.trace") c.trace_path = v;
    else if (key.rfind("tensors.", 0) == 0) c.tensor_paths[key.substr(8)] = v;
    else if (auto it = weights.find(key); it != weights.end()) c.weights.*(it->second) = to_double(key, v);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  if (c.bandwidth_cap < 0) throw std::invalid_argument("bandwidth_cap must be non-negative");
  if (c.alphabet.empty()) throw std::invalid_argument("alphabet must not be empty");
  return c;
}

RunConfig load_run_config(const std::string& path, RunConfig base) { return apply_config(load_config_table(path), base); }

}  // namespace stgen
