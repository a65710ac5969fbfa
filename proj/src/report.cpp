#include "heatctl/report.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace heatctl {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string ArtifactIndex::path_of(const std::string& name) const {
  return (std::filesystem::path(directory) / name).string();
}

void write_json_file(ArtifactIndex& index, const std::string& name,
                     const nlohmann::json& payload) {
  write_text_atomic(index.path_of(name), payload.dump(2) + "\n");
  index.files.push_back(name);
}

void write_csv_file(ArtifactIndex& index, const std::string& name,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  write_text_atomic(index.path_of(name), out);
  index.files.push_back(name);
}

void write_plot_file(ArtifactIndex& index, const std::string& name,
                     const std::vector<std::pair<double, double>>& series) {
  std::string out;
  for (const auto& [x, y] : series) {
    out += format_number(x);
    out += ' ';
    out += format_number(y);
    out += '\n';
  }
  write_text_atomic(index.path_of(name), out);
  index.files.push_back(name);
}

std::string current_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

void write_manifest(ArtifactIndex& index, const RunManifest& manifest) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["artifact_version"] = kArtifactVersion;
  j["subcommand"] = manifest.subcommand;
  j["config"] = manifest.config_snapshot;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["elapsed_seconds"] = manifest.elapsed_seconds;
  j["exit_code"] = manifest.exit_code;
  j["reason"] = manifest.reason;
  j["files"] = index.files;
  write_text_atomic(index.path_of("manifest.json"), j.dump(2) + "\n");
}

}  // namespace heatctl
