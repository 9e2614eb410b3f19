#pragma once

#include <string>

#include "json.hpp"

namespace nsvr {

// Reader for the TOML subset used by experiment configs: comments, [table]
// and [a.b] headers, [[array.of.tables]], bare keys, and values that are
// basic strings, integers, floats, booleans or (nested, multi-line) arrays.
// The document is returned as a JSON object.
nlohmann::json parse_toml(const std::string& text, const std::string& source = "<string>");
nlohmann::json read_toml_file(const std::string& path);

}  // namespace nsvr
