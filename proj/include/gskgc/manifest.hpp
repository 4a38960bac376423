#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gskgc {

/// Provenance record written next to every pipeline output.
struct RunManifest {
  struct Stage {
    std::string name;
    std::string started;
    std::string finished;
  };
  struct File {
    std::string role;  // "input" or "output"
    std::string path;
    std::string sha256;
  };

  std::string command;
  std::string dataset;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<Stage> stages;
  std::vector<File> files;

  void begin_stage(std::string name);
  void end_stage();
  /// Digests the file as it is now.
  void add_file(std::string role, const std::filesystem::path& path);

  [[nodiscard]] std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// `<output>.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

std::string utc_timestamp();

}  // namespace gskgc
