#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "config.h"

namespace lbp::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kImpractical = 4,
};

enum class KeyType { number, integer, flag, numbers, integers, choice, text };

struct KeySpec {
  std::string name;
  KeyType type = KeyType::number;
  std::string default_value;
  std::string help;
  std::vector<std::string> choices;
};

struct ExperimentSpec {
  std::string name;
  std::string summary;
  std::vector<KeySpec> keys;

  auto find_key(std::string_view key) const -> const KeySpec*;
};

auto experiments() -> const std::vector<ExperimentSpec>&;
auto find_experiment(std::string_view name) -> const ExperimentSpec*;

// Environment variable that, when set, replaces the output directory.
inline constexpr const char* kOutputDirEnv = "LBP_OUTPUT_DIR";

// Defaults, then file entries, then overrides. Unknown keys throw ConfigError.
// An `experiment` entry is accepted only if it names this experiment.
auto resolve_config(const ExperimentSpec& spec, const ConfigEntries& file,
                    const ConfigEntries& overrides) -> Config;

// Type and regime violations of a resolved config; empty when runnable.
auto check_config(const ExperimentSpec& spec, const Config& config) -> std::vector<std::string>;

// Schema and regime report for raw entries, without running anything. The
// experiment comes from `experiment` unless empty, else from an `experiment` entry.
auto validate_entries(std::string experiment, const ConfigEntries& entries) -> std::vector<std::string>;

auto output_directory(const ExperimentSpec& spec, const Config& config) -> std::filesystem::path;

// Checks, runs, and writes artifacts plus manifest.json into the output directory.
auto run_experiment(const ExperimentSpec& spec, const Config& config, std::ostream& log) -> int;

// Command-line entry point.
auto main_entry(int argc, const char* const* argv) -> int;

}  // namespace lbp::cli
