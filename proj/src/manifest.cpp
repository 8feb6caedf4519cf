#include "turnkit/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>
#include <unistd.h>

#include "turnkit/error.hpp"

namespace turnkit {

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path manifest_path_for(const fs::path& artifact) {
  std::string s = artifact.string();
  while (s.size() > 1 && (s.back() == '/' || s.back() == '\\')) s.pop_back();
  return fs::path(s + ".manifest.json");
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config"] = nlohmann::ordered_json::parse(m.config_json);
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["duration_seconds"] = m.duration_seconds;
  if (!m.model_json.empty()) j["model"] = nlohmann::ordered_json::parse(m.model_json);
  return j.dump(2) + "\n";
}

void write_run_manifest(const RunManifest& m, const fs::path& artifact) {
  write_file_atomic(manifest_path_for(artifact), manifest_json(m));
}

}  // namespace turnkit
