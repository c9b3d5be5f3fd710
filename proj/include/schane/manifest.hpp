// Run manifest: the resolved configuration, derived seeds, timings, emitted
// metrics and output paths of one command invocation. Re-running a command
// with the manifest as its config reproduces every metric bit-identically.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "schane/error.hpp"
#include "schane/runconfig.hpp"

namespace schane::cli {

inline constexpr const char* kManifestFormat = "schane.manifest";

struct Manifest {
  std::string command;
  json config_document;
  json seeds = json::object();
  json metrics = json::object();
  json outputs = json::object();
  double wall_seconds = 0.0;

  json to_json() const {
    return json{
        {"format", kManifestFormat}, {"version", 1},     {"tool_version", kToolVersion},
        {"command", command},        {"config", config_document},
        {"seeds", seeds},            {"timings", {{"wall_seconds", wall_seconds}}},
        {"metrics", metrics},        {"outputs", outputs},
    };
  }
};

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << m.to_json().dump(1) << '\n';
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

inline json read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::FormatError, "manifest parse error: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("format") || j["format"] != kManifestFormat)
    fail(ErrorKind::FormatError, "not a manifest file: " + path.string());
  return j;
}

}  // namespace schane::cli
