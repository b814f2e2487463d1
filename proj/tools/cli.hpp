#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qsd::cli {

/// Effective key/value settings: defaults, then preset, then config file,
/// then command-line flags.
using Settings = std::map<std::string, std::string>;

Settings default_settings();

/// Parses `key = value` lines with `#` comments. Unknown keys are errors.
Settings parse_config(std::istream& in);

/// Writes settings in the config-file format; parse_config reads it back.
void dump_config(std::ostream& out, const Settings& settings);

/// Entry point with injectable streams. Returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qsd::cli
