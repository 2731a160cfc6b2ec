#pragma once

#include <string>

#include "aggrex/sampler.hpp"

namespace aggrex {

// Draw matrix serialization. Column headers are the graph-qualified report
// names ("food.eta0[0]"); the two leading columns are chain and iter
// (both 0-based, iter counts retained draws within the chain). Values round
// trip exactly through the shared full-precision formatter.
void write_draws_csv(const std::string& path, const DrawSet& draws);
DrawSet read_draws_csv(const std::string& path);

}  // namespace aggrex
