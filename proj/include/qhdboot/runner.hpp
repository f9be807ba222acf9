#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qhdboot/harness.hpp"

namespace qhdboot {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitFail = 2;

enum class OutputFormat { csv, json, both };
OutputFormat parse_format(const std::string& name);

struct Diagnostic {
  enum class Severity { error, warning };
  Severity severity;
  std::string key;
  std::string message;
};

/// Schema and cross-field checks of a version-1 experiment config. No side effects.
std::vector<Diagnostic> validate_config_text(const std::string& json_text);
std::vector<Diagnostic> validate_config_file(const std::filesystem::path& path);
bool has_errors(const std::vector<Diagnostic>& diagnostics);
std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics);

/// Builds the experiment from a config; throws ConfigInvalid naming the key.
ExperimentConfig parse_experiment(const std::string& json_text);

/// FNV-1a 64 of the canonical (key-sorted) dump, as 16 hex digits.
std::string config_hash(const std::string& json_text);

struct RunOptions {
  std::string subcommand;  // consistency, derivative-check, weights-audit, limit-sample
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  OutputFormat format = OutputFormat::both;
};

/// Runs a subcommand and writes its outputs plus manifest.json into out_dir.
/// Returns kExitPass, kExitFail or kExitError; errors are described on `log`.
int run(const RunOptions& options, std::ostream& log);

}  // namespace qhdboot
