#pragma once

#include <string>

#include "stgen/arch.hpp"

namespace stgen {

/// Pretty-printed JSON document; see docs/archspec.schema.json.
std::string arch_to_json(const ArchSpec& arch);

/// Inverse of arch_to_json. Throws std::invalid_argument on malformed
/// documents.
ArchSpec arch_from_json(const std::string& text);

void save_arch(const std::string& path, const ArchSpec& arch);
ArchSpec load_arch(const std::string& path);

}  // namespace stgen
