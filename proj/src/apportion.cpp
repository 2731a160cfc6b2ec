#include "aggrex/apportion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aggrex/errors.hpp"

namespace aggrex {

std::vector<long long> allocate_strata(const StratumTable& table, long long total) {
  const auto& strata = table.strata();
  if (table.total_population() <= 0)
    throw_data("EmptyPopulation", "stratum table has no population");
  long long nonzero = 0;
  for (const auto& s : strata)
    if (s.population_count > 0) ++nonzero;
  if (total < nonzero)
    throw_config("PopulationTooSmall",
                 "population_total " + std::to_string(total) + " cannot cover " +
                     std::to_string(nonzero) + " populated strata");

  const std::size_t n = strata.size();
  const double pop_total = static_cast<double>(table.total_population());
  std::vector<long long> counts(n, 0);
  std::vector<double> remainder(n, 0.0);
  long long assigned = 0;
  for (std::size_t d = 0; d < n; ++d) {
    const double quota =
        static_cast<double>(total) * static_cast<double>(strata[d].population_count) / pop_total;
    counts[d] = static_cast<long long>(std::floor(quota));
    remainder[d] = quota - static_cast<double>(counts[d]);
    assigned += counts[d];
  }

  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < n; ++d)
    if (strata[d].population_count > 0) order.push_back(d);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];  // stable -> lowest index wins ties
  });
  for (std::size_t k = 0; assigned < total; ++k) {
    ++counts[order[k % order.size()]];
    ++assigned;
  }

  // Minimum one per populated stratum, funded by the current largest count.
  for (std::size_t d = 0; d < n; ++d) {
    if (strata[d].population_count <= 0 || counts[d] > 0) continue;
    std::size_t donor = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (counts[k] > counts[donor]) donor = k;
    --counts[donor];
    ++counts[d];
  }
  return counts;
}

}  // namespace aggrex
