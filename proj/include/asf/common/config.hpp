#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "asf/common/error.hpp"

namespace asf {
ASF_DEFINE_ERROR(ConfigNotFoundError);
}

namespace asf::config {

using Json = nlohmann::json;

// Parses the TOML subset used by config files: [table] headers, dotted keys,
// strings, integers, floats, booleans and inline arrays. Anything else is a
// ConfigError naming the offending line.
Json parse_toml(std::string_view text);

// Loads a `.json` or `.toml` file into a JSON object. Throws
// ConfigNotFoundError if the file does not exist.
Json load_file(const std::filesystem::path& path);

// Applies one `dotted.key=value` override. The key must already exist in
// `target` and the value must parse as the same JSON type (ints accept only
// integers, floats accept any number).
void apply_override(Json& target, std::string_view assignment);

// Recursively copies keys from `source` into `target`; every key in `source`
// must exist in `target` with a compatible type.
void merge_checked(Json& target, const Json& source, const std::string& prefix = "");

}  // namespace asf::config
