#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stgen/dse.hpp"
#include "stgen/tensor.hpp"
#include "stgen/tiling.hpp"

namespace stgen {

/// Flat `key = value` pairs from a TOML-style file; `[section]` headers
/// prefix keys as "section.key". Strings may be quoted, arrays use [a, b].
using ConfigTable = std::map<std::string, std::string>;

ConfigTable parse_config(const std::string& text);
ConfigTable load_config_table(const std::string& path);

struct RunConfig {
  ArrayDims array;
  std::int64_t bandwidth_cap = 0;
  DType dtype = DType::Int64;
  std::uint64_t seed = 1;
  std::vector<std::int64_t> alphabet{-1, 0, 1};
  std::int64_t time_budget = 0;
  std::size_t workers = 1;
  std::size_t simulate_top = 0;
  CostWeights weights;
  std::string algebra_path;
  std::string arch_path;
  std::string out_path;
  std::string trace_path;
  std::map<std::string, std::string> tensor_paths;
};

/// Applies the keys of `table` on top of `base`. Unknown keys throw
/// std::invalid_argument so typos do not pass silently.
RunConfig apply_config(const ConfigTable& table, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});

std::vector<std::int64_t> parse_int_list(const std::string& text);

}  // namespace stgen
