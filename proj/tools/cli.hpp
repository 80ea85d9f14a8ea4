#pragma once

#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mflab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitUsage = 2;

std::vector<std::string> subcommands();

// Parses a JSON config file; throws ConfigError on I/O or syntax errors.
nlohmann::json load_config(const std::filesystem::path& path);

// Checks the document against the schema of `command` (or of its own
// "command" key when command is empty). Unknown keys, wrong types and missing
// required keys throw ConfigError naming the offending key.
void validate_config(const nlohmann::json& config, std::string_view command = {});

// Entry point; returns the process exit status. Progress and summaries go to
// out, errors to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mflab::cli
