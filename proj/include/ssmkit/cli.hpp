#pragma once

// Batch front end: `ssmkit <model|ssm|frc|backbone|verify> [--config file.json] [--dotted.key value ...]`.

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ssmkit::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kOuterResonance = 4;

nlohmann::json default_config();

/// defaults <- file <- flags. Flag overrides are (dotted key, raw text) pairs.
nlohmann::json resolve_config(const nlohmann::json& file,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

/// Runs one command line (args excludes the program name); returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssmkit::cli
