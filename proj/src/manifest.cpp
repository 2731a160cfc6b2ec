#include "aggrex/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aggrex/errors.hpp"
#include "aggrex/rng.hpp"

namespace aggrex {

using nlohmann::json;

std::string hash_files_hex(const std::vector<std::string>& paths) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw_data("FileError", "cannot open '" + p + "' for hashing");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    h = fnv1a(bytes.data(), bytes.size(), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["timings_sec"] = m.timings_sec;
  j["clamp_count"] = m.clamp_count;
  j["divergence_count"] = m.divergence_count;
  j["degenerate_pert"] = m.degenerate_pert;
  std::ofstream out(path);
  if (!out) throw_data("FileError", "cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out.good()) throw_data("FileError", "failed writing '" + path + "'");
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("FileError", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw_data("ParseError", path + ": not valid JSON");
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.timings_sec = j.at("timings_sec").get<std::map<std::string, double>>();
    m.clamp_count = j.at("clamp_count").get<long long>();
    m.divergence_count = j.at("divergence_count").get<long long>();
    m.degenerate_pert = j.at("degenerate_pert").get<long long>();
  } catch (const json::exception& e) {
    throw_data("ParseError", path + ": " + e.what());
  }
  return m;
}

}  // namespace aggrex
