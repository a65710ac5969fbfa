#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace heatctl {

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kArtifactVersion = "0.1.0";

// Deterministic number formatting shared by every writer: shortest
// round-trippable decimal, so identical values always print identically.
std::string format_number(double v);

// Write-then-rename so readers never observe a partial file.
void write_text_atomic(const std::string& path, const std::string& content);

// Collects everything a run produces; feeds the manifest file index.
struct ArtifactIndex {
  std::string directory;
  std::vector<std::string> files;  // relative names

  std::string path_of(const std::string& name) const;
};

void write_json_file(ArtifactIndex& index, const std::string& name,
                     const nlohmann::json& payload);

// UTF-8 CSV with a header row.
void write_csv_file(ArtifactIndex& index, const std::string& name,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows);

// Two-column whitespace-separated series, one point per line.
void write_plot_file(ArtifactIndex& index, const std::string& name,
                     const std::vector<std::pair<double, double>>& series);

struct RunManifest {
  nlohmann::json config_snapshot;
  std::string subcommand;
  std::string started_at;   // wall-clock; the only nondeterministic fields
  std::string finished_at;  // live in this file
  double elapsed_seconds = 0.0;
  int exit_code = 0;
  std::string reason;  // machine-readable failure reason, empty on success
};

std::string current_timestamp();

// Writes manifest.json (atomically) listing every file in the index.
void write_manifest(ArtifactIndex& index, const RunManifest& manifest);

}  // namespace heatctl
