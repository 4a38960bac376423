#include "gskgc/manifest.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>

#include "gskgc/io.hpp"

namespace gskgc {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::begin_stage(std::string name) { stages.push_back({std::move(name), utc_timestamp(), {}}); }

void RunManifest::end_stage() {
  if (!stages.empty()) stages.back().finished = utc_timestamp();
}

void RunManifest::add_file(std::string role, const std::filesystem::path& path) {
  files.push_back({std::move(role), path.string(), sha256_file(path)});
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["dataset"] = dataset;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  auto st = nlohmann::ordered_json::array();
  for (const auto& s : stages) st.push_back({{"name", s.name}, {"started", s.started}, {"finished", s.finished}});
  j["stages"] = st;
  auto fs = nlohmann::ordered_json::array();
  for (const auto& f : files) fs.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
  j["files"] = fs;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_file_atomic(path, to_json()); }

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

}  // namespace gskgc
