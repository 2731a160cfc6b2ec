#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace aggrex {

// Complete generator document for the default synthetic study: 400 surveyed
// individuals over 2 days, 3 food categories with power parameter 0.3, a
// 3-component supplement mixture, and 10% of body weights masked. The text is
// valid input for run_synth and for the straight-line reference runner.
std::string default_truth_text();

struct SynthOutput {
  std::vector<std::string> files;  // everything written, truth echo included
  long long survey_rows = 0;
  long long medicine_rows = 0;
  long long missing_weights = 0;  // surveyed individuals with masked weight
};

// Draws one dataset bundle from the ground-truth parameters in `truth_path`
// and writes the training CSVs plus truth_params.json into out_dir. The echo
// carries the generated supplement count pools so the reference runner and
// the fitted pipeline resample from identical pools.
SynthOutput run_synth(const std::string& truth_path, std::uint64_t seed,
                      const std::string& out_dir);

}  // namespace aggrex
