#pragma once

#include <vector>

#include "aggrex/types.hpp"

namespace aggrex {

// Pseudo-individual counts per stratum: largest-remainder apportionment of
// `total` by population share, ties broken toward the lowest stratum index,
// then a minimum of one per nonzero-population stratum (taken from the
// largest count). Counts sum to `total` exactly.
std::vector<long long> allocate_strata(const StratumTable& table, long long total);

}  // namespace aggrex
