#ifndef MEDEX_CLI_HPP
#define MEDEX_CLI_HPP

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

namespace medex::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every command's outputs. The config hash
// is taken over the canonical (key-sorted) JSON dump of the effective
// configuration, so reordering keys in a config file does not change it.
struct RunManifest {
  std::string command;
  std::string config_hash;  // 16 hex digits
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string started;   // UTC, ISO-8601
  std::string finished;
  std::vector<std::string> outputs;  // names relative to the output directory

  nlohmann::json to_json() const;
};

// Parses argv and runs one subcommand (design | explore | compare | bench).
// Returns the process exit code: 0 on success, 2 on a usage or configuration
// error, 3 on an evaluation or numerical failure.
int run(int argc, const char* const* argv);

}  // namespace medex::cli

#endif
