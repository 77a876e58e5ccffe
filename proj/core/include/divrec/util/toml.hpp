#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string_view>

namespace divrec::util {

// Reads the TOML subset used by config and template files: [table] and
// [dotted.table] headers, bare or quoted keys, basic/literal/multi-line
// strings, integers, floats, booleans and (nested) arrays. Inline tables,
// dates and arrays of tables are rejected with ConfigError.
nlohmann::json parse_toml(std::string_view text);
nlohmann::json load_toml(const std::filesystem::path& path);

}  // namespace divrec::util
