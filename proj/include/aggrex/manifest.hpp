#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace aggrex {

inline constexpr const char* kVersion = "0.1.0";

// Provenance record written next to every command's outputs. The input hash
// covers file contents only, so equal configurations hash equally no matter
// where they live; timings are informational and excluded from any
// reproducibility comparison.
struct RunManifest {
  std::string command;
  std::string config_hash;  // 16 hex digits over all input files, in order
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::map<std::string, double> timings_sec;
  long long clamp_count = 0;
  long long divergence_count = 0;
  long long degenerate_pert = 0;
};

// FNV-1a over the concatenated byte contents of `paths`, as fixed-width hex.
std::string hash_files_hex(const std::vector<std::string>& paths);

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace aggrex
