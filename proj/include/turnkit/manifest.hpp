#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace turnkit {

namespace fs = std::filesystem;

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const fs::path& path, const std::string& content);

std::string read_file(const fs::path& path);

// Record of one CLI invocation, stored next to the artifact it describes.
struct RunManifest {
  std::string command;
  std::string config_json = "{}";  // resolved configuration
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string version;
  double duration_seconds = 0.0;
  std::string model_json;  // optional fusion/head/history descriptor
};

// "<artifact>.manifest.json" (trailing separators removed).
fs::path manifest_path_for(const fs::path& artifact);
std::string manifest_json(const RunManifest& m);
void write_run_manifest(const RunManifest& m, const fs::path& artifact);

}  // namespace turnkit
