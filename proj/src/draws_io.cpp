#include "aggrex/draws_io.hpp"

#include <fstream>

#include "aggrex/csv.hpp"
#include "aggrex/datasets.hpp"
#include "aggrex/errors.hpp"

namespace aggrex {

void write_draws_csv(const std::string& path, const DrawSet& draws) {
  std::ofstream out(path);
  if (!out) throw_data("ParseError", "cannot open " + path + " for writing");
  out << "chain,iter";
  for (const auto& name : draws.names)
    out << ',' << csv_escape(draws.graph_name + "." + name);
  out << '\n';
  for (int c = 0; c < draws.chains; ++c)
    for (int s = 0; s < draws.samples_per_chain; ++s) {
      out << c << ',' << s;
      const Eigen::Index r = static_cast<Eigen::Index>(c) * draws.samples_per_chain + s;
      for (Eigen::Index j = 0; j < draws.draws.cols(); ++j)
        out << ',' << format_double(draws.draws(r, j));
      out << '\n';
    }
  if (!out.good()) throw_data("ParseError", "write failed for " + path);
}

DrawSet read_draws_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "iter")
    throw_data("ParseError", path + ": expected chain,iter, then draw columns");

  DrawSet d;
  // Headers carry "<graph>." prefixes; the graph name is the shared prefix.
  const std::string& first = t.header[2];
  const auto dot = first.find('.');
  if (dot == std::string::npos)
    throw_data("ParseError", path + ": draw column \"" + first + "\" lacks a graph prefix");
  d.graph_name = first.substr(0, dot);
  for (std::size_t j = 2; j < t.header.size(); ++j) {
    const std::string& h = t.header[j];
    if (h.rfind(d.graph_name + ".", 0) != 0)
      throw_data("ParseError", path + ": column \"" + h + "\" does not belong to graph \"" +
                                   d.graph_name + "\"");
    d.names.push_back(h.substr(d.graph_name.size() + 1));
  }

  const int cols = static_cast<int>(d.names.size());
  int max_chain = -1, max_iter = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    max_chain = std::max(max_chain, static_cast<int>(parse_int(t, r, 0)));
    max_iter = std::max(max_iter, static_cast<int>(parse_int(t, r, 1)));
  }
  d.chains = max_chain + 1;
  d.samples_per_chain = max_iter + 1;
  if (d.chains < 1 || d.samples_per_chain < 1 ||
      static_cast<long long>(d.chains) * d.samples_per_chain !=
          static_cast<long long>(t.rows.size()))
    throw_data("ParseError", path + ": draw rows do not form a full chain-by-iteration grid");

  d.draws.resize(static_cast<Eigen::Index>(t.rows.size()), cols);
  std::vector<char> seen(t.rows.size(), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long long chain = parse_int(t, r, 0);
    const long long iter = parse_int(t, r, 1);
    const auto idx = static_cast<std::size_t>(chain) * d.samples_per_chain +
                     static_cast<std::size_t>(iter);
    if (chain < 0 || iter < 0 || idx >= t.rows.size() || seen[idx])
      throw_data("ParseError", path + ": duplicate or out-of-range chain/iter at data row " +
                                   std::to_string(r + 1));
    seen[idx] = 1;
    for (int j = 0; j < cols; ++j)
      d.draws(static_cast<Eigen::Index>(idx), j) = parse_double(t, r, j + 2);
  }
  d.chain_stats.assign(static_cast<std::size_t>(d.chains), ChainStats{});
  return d;
}

}  // namespace aggrex
