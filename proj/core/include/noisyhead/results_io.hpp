// Deterministic persistence: summary.csv / trials.csv / manifest.json.
//
// CSV dialect is fixed: comma delimiter, '.' decimal point, UTF-8, LF line
// endings, no quoting (all fields are numeric or simple names). Numbers are
// written as the shortest decimal that parses back to the same double, so
// identical runs produce byte-identical files on any platform.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "noisyhead/experiments.hpp"

namespace noisyhead {

struct RunManifest {
  std::string suite;
  std::string version;
  std::string timestamp;  // ISO 8601 UTC, informational only
  ExperimentConfig config;
  std::vector<GridPointInfo> resolved;
};

RunManifest make_manifest(const ExperimentConfig& cfg);

struct OutputPaths {
  std::filesystem::path summary;
  std::filesystem::path trials;
  std::filesystem::path manifest;
};

/// Shortest round-trippable decimal for a double ("1e+30", "0.1", "-3").
std::string format_double(double value);

/// Grid coordinates collapse to integer form when exactly integral.
std::string format_grid_value(double value);

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

/// Writes manifest.json alone; called before a run starts so the resolved
/// configuration survives a crash.
std::filesystem::path write_manifest(const RunManifest& manifest,
                                     const std::filesystem::path& out_dir);

/// Writes summary.csv, trials.csv and manifest.json under out_dir.
OutputPaths write_results(const SummaryTable& table, const std::vector<TrialRecord>& records,
                          const RunManifest& manifest, const std::filesystem::path& out_dir);

/// Readers for the two CSV schemas; used for round-trip verification.
SummaryTable read_summary_csv(const std::filesystem::path& path);
std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path);

}  // namespace noisyhead
