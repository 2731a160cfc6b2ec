#pragma once

#include <cstdint>
#include <string>

namespace aggrex {

// Output of the straight-line reference simulation: pooled percentiles of
// aggregated exposure under fixed true parameters.
struct OracleResult {
  double p05 = 0.0, p50 = 0.0, p95 = 0.0;
  long long samples = 0;
};

// Brute-force reference runner. Reads the truth-parameter file and a scenario
// file and simulates the whole population generation procedure in one
// straight line of code, deliberately sharing nothing with the engine or the
// model modules (its own RNG, transforms, and sampling inline). Used to
// cross-check the engine; slow and simple on purpose.
OracleResult oracle_run(const std::string& truth_path, const std::string& scenario_path,
                        std::uint64_t seed);

void write_oracle_file(const std::string& path, const OracleResult& result);

}  // namespace aggrex
