#include "aggrex/cli_app.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "aggrex/builders.hpp"
#include "aggrex/datasets.hpp"
#include "aggrex/diagnostics.hpp"
#include "aggrex/draws_io.hpp"
#include "aggrex/errors.hpp"
#include "aggrex/manifest.hpp"
#include "aggrex/model_config.hpp"
#include "aggrex/oracle.hpp"
#include "aggrex/pseudopop.hpp"
#include "aggrex/sampler.hpp"
#include "aggrex/scenario.hpp"
#include "aggrex/sim_bundle.hpp"
#include "aggrex/summaries.hpp"
#include "aggrex/synth.hpp"

namespace aggrex {
namespace {

namespace fs = std::filesystem;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// All option values, one struct so the parser table can be rebuilt for
// documentation checks without touching globals.
struct CliOptions {
  // fit
  std::string fit_data;
  std::string fit_model_config;
  int fit_chains = -1;
  int fit_warmup = -1;
  int fit_samples = -1;
  std::uint64_t fit_seed = 0;
  std::string fit_out;
  // simulate
  std::string sim_draws;
  std::string sim_scenario;
  std::uint64_t sim_seed = 0;
  long long sim_population = -1;
  std::string sim_out;
  // summarize
  std::string sum_samples;
  std::string sum_probes = "0.05,0.5,0.95";
  double sum_ci = 0.95;
  std::string sum_group_by;
  std::string sum_out;
  // synth
  std::string synth_truth;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  // oracle
  std::string orc_truth;
  std::string orc_scenario;
  std::uint64_t orc_seed = 0;
  std::string orc_out;
  // shared
  int threads = 0;
};

struct Subcommands {
  CLI::App* fit = nullptr;
  CLI::App* simulate = nullptr;
  CLI::App* summarize = nullptr;
  CLI::App* synth = nullptr;
  CLI::App* oracle = nullptr;
};

Subcommands build_app(CLI::App& app, CliOptions& o) {
  app.description("Long-term aggregated chemical exposure: Bayesian fit, "
                  "pseudo-population simulation, and summaries.");
  app.require_subcommand(1);
  app.add_option("--threads", o.threads,
                 "Worker threads for sampling and simulation; 0 picks the hardware "
                 "count. Overrides the AGGREX_THREADS environment variable.");

  Subcommands sub;

  sub.fit = app.add_subcommand(
      "fit", "Fit the per-source posterior graphs and write draws, diagnostics, and "
             "the simulation bundle. Exits 5 when any graph fails its convergence "
             "checks (outputs are still written).");
  sub.fit->add_option("--data", o.fit_data,
                      "Directory holding strata.csv, category_tree.csv, survey.csv, "
                      "products.csv, concentrations.csv, medicines.csv, "
                      "pcp_constants.csv, and optionally category_map.csv.")
      ->required();
  sub.fit->add_option("--model-config", o.fit_model_config,
                      "JSON model configuration; defaults apply when omitted.");
  sub.fit->add_option("--chains", o.fit_chains,
                      "Number of sampling chains; overrides the model config.");
  sub.fit->add_option("--warmup", o.fit_warmup,
                      "Adaptation iterations per chain; overrides the model config.");
  sub.fit->add_option("--samples", o.fit_samples,
                      "Kept posterior draws per chain; overrides the model config.");
  sub.fit->add_option("--seed", o.fit_seed, "Root random seed for all chains.");
  sub.fit->add_option("--out-dir", o.fit_out,
                      "Output directory for draws_<graph>.csv, diagnostics_<graph>.txt, "
                      "sim_bundle.json, and manifest.json.")
      ->required();

  sub.simulate = app.add_subcommand(
      "simulate", "Generate the pseudo-population from fitted draws under a scenario and "
                  "write one exposure row per simulated individual.");
  sub.simulate->add_option("--draws", o.sim_draws,
                           "Directory written by fit (draw files plus sim_bundle.json).")
      ->required();
  sub.simulate->add_option("--scenario", o.sim_scenario,
                           "JSON scenario: enabled sources, market presence, nanoparticle "
                           "fraction, retention rules, population size.")
      ->required();
  sub.simulate->add_option("--seed", o.sim_seed, "Root random seed for the simulation.");
  sub.simulate->add_option("--population", o.sim_population,
                           "Pseudo-population size; overrides the scenario's value.");
  sub.simulate->add_option("--out-dir", o.sim_out,
                           "Output directory for exposure_samples.csv and manifest.json. "
                           "Columns: iteration, stratum_age, stratum_gender, stratum_region, "
                           "food, supplements, medicines, pcp, aggregated (mg per kg per day).")
      ->required();

  sub.summarize = app.add_subcommand(
      "summarize", "Reduce an exposure sample file to population quantiles, per-stratum "
                   "means, source contributions, and a distribution band.");
  sub.summarize->add_option("--samples", o.sum_samples,
                            "exposure_samples.csv produced by simulate.")
      ->required();
  sub.summarize->add_option("--probes", o.sum_probes,
                            "Comma-separated quantile probes in (0,1).");
  sub.summarize->add_option("--ci", o.sum_ci,
                            "Central credible-interval mass in (0,1) for every estimate.");
  sub.summarize->add_option("--group-by", o.sum_group_by,
                            "Comma-separated grouping keys for the stratum table; any of "
                            "age_group, gender.");
  sub.summarize->add_option("--out-dir", o.sum_out,
                            "Output directory for population_quantiles.csv (probe, estimate, "
                            "ci_low, ci_high), stratum_summary.csv (age_group, gender, source, "
                            "estimate, ci_low, ci_high), source_contributions.csv (source, "
                            "share, ci_low, ci_high), ecdf_band.csv (value, cdf, ci_low, "
                            "ci_high), and manifest.json.")
      ->required();

  sub.synth = app.add_subcommand(
      "synth", "Generate a synthetic training-data set with known parameters for "
               "calibration studies.");
  sub.synth->add_option("--truth", o.synth_truth,
                        "Truth-parameter JSON; a built-in document is used when omitted "
                        "(written to the output directory as default_truth.json).");
  sub.synth->add_option("--seed", o.synth_seed, "Root random seed for data generation.");
  sub.synth->add_option("--out-dir", o.synth_out,
                        "Output directory for the training CSVs, truth_params.json, and "
                        "manifest.json.")
      ->required();

  sub.oracle = app.add_subcommand(
      "oracle", "Run the straight-line reference simulation under fixed true parameters "
                "and write pooled exposure percentiles.");
  sub.oracle->add_option("--truth", o.orc_truth, "Truth-parameter JSON.")->required();
  sub.oracle->add_option("--scenario", o.orc_scenario, "Scenario JSON, as for simulate.")
      ->required();
  sub.oracle->add_option("--seed", o.orc_seed, "Root random seed.");
  sub.oracle->add_option("--out", o.orc_out,
                         "Output CSV of pooled percentiles (probe, value rows plus a sample "
                         "count); a manifest is written next to it.")
      ->required();

  // Parent options (--threads) may appear after the subcommand name.
  for (CLI::App* s : {sub.fit, sub.simulate, sub.summarize, sub.synth, sub.oracle})
    s->fallthrough();

  return sub;
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("AGGREX_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0 || v > 1024)
      throw_config("BadThreads", "AGGREX_THREADS must be a positive integer, got \"" +
                                     std::string(env) + "\"");
    return static_cast<int>(v);
  }
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(pos, comma - pos);
    std::size_t a = item.find_first_not_of(" \t");
    std::size_t b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
    pos = comma + 1;
  }
  return out;
}

double parse_probe(const std::string& text) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    throw_config("BadProbes", "probe \"" + text + "\" is not a number");
  return v;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_config("BadOutputDir", "cannot create \"" + dir + "\": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("FileError", "cannot open \"" + path + "\" for writing");
  out << text;
  out.flush();
  if (!out) throw_data("FileError", "write to \"" + path + "\" failed");
}

const char* const kGraphNames[7] = {"food",   "supplements",        "medicines", "market_food",
                                    "market_supplements", "market_pcp", "conc_food"};

int cmd_fit(const CliOptions& o) {
  Timer total;
  ensure_dir(o.fit_out);

  ModelConfig cfg = o.fit_model_config.empty() ? ModelConfig{}
                                               : ModelConfig::load(o.fit_model_config);
  if (o.fit_chains > 0) cfg.sampler.chains = o.fit_chains;
  if (o.fit_warmup > 0) cfg.sampler.warmup = o.fit_warmup;
  if (o.fit_samples > 0) cfg.sampler.samples = o.fit_samples;
  cfg.validate();

  const std::string map_path = join_path(o.fit_data, "category_map.csv");
  std::optional<CategoryMap> map;
  if (fs::exists(map_path)) map = load_category_map(map_path);

  std::vector<std::string> inputs = {
      join_path(o.fit_data, "strata.csv"),        join_path(o.fit_data, "category_tree.csv"),
      join_path(o.fit_data, "survey.csv"),        join_path(o.fit_data, "products.csv"),
      join_path(o.fit_data, "concentrations.csv"), join_path(o.fit_data, "medicines.csv"),
      join_path(o.fit_data, "pcp_constants.csv")};
  if (map) inputs.push_back(map_path);
  if (!o.fit_model_config.empty()) inputs.push_back(o.fit_model_config);

  StratumTable census = load_stratum_table(inputs[0]);
  CategoryTree tree = load_category_tree(inputs[1]);
  const CategoryMap* map_ptr = map ? &*map : nullptr;
  std::vector<SurveyObservation> survey = load_survey(inputs[2], tree, map_ptr);
  std::vector<ProductObservation> products = load_products(inputs[3], tree, map_ptr);
  std::vector<ConcentrationObservation> conc = load_concentrations(inputs[4], tree, map_ptr);
  std::vector<MedicineUseObservation> medicines = load_medicines(inputs[5]);
  PcpConstants pcp = load_pcp_constants(inputs[6]);

  // One predictor layout for every graph, taken from the survey; medicine
  // records with levels the survey never saw fail at build time.
  CovariateSpace cov = CovariateSpace::from_survey(survey, cfg.predictors);

  ModelGraph graphs[7] = {
      build_food_graph(survey, tree, cfg, cov),
      build_supplements_graph(survey, tree, cfg, cov),
      build_medicines_graph(medicines, cfg, cov),
      build_market_graph(products, tree, cfg.food_root, MarketSource::Food),
      build_market_graph(products, tree, cfg.supplement_root, MarketSource::Supplements),
      build_market_graph(products, tree, cfg.pcp_root, MarketSource::Pcp),
      build_food_concentration_graph(conc, tree, cfg.food_root)};

  SamplerConfig scfg;
  scfg.chains = cfg.sampler.chains;
  scfg.warmup = cfg.sampler.warmup;
  scfg.samples = cfg.sampler.samples;
  scfg.target_accept = cfg.sampler.target_accept;
  scfg.max_tree_depth = cfg.sampler.max_tree_depth;
  scfg.init_radius = cfg.sampler.init_radius;
  scfg.seed = o.fit_seed;
  scfg.threads = resolve_threads(o.threads);

  RunManifest manifest;
  manifest.command = "fit";
  manifest.seed = o.fit_seed;
  manifest.config_hash = hash_files_hex(inputs);

  std::vector<std::string> failed;
  for (int g = 0; g < 7; ++g) {
    Timer t;
    DrawSet draws = run_nuts(graphs[g], scfg);
    manifest.divergence_count += draws.total_divergences();
    write_draws_csv(join_path(o.fit_out, std::string("draws_") + kGraphNames[g] + ".csv"),
                    draws);
    DiagnosticsReport report = diagnose(draws);
    write_text_file(join_path(o.fit_out, std::string("diagnostics_") + kGraphNames[g] + ".txt"),
                    format_report(report));
    if (!report.pass()) failed.push_back(kGraphNames[g]);
    manifest.timings_sec[kGraphNames[g]] = t.seconds();
    std::cerr << "fit: " << kGraphNames[g] << " done in " << manifest.timings_sec[kGraphNames[g]]
              << "s" << (report.pass() ? "" : " (diagnostics FAILED)") << "\n";
  }

  std::vector<std::vector<std::string>> levels;
  for (int k = 0; k < cov.predictors(); ++k) levels.push_back(cov.levels(k));
  SimBundle bundle =
      build_sim_bundle(cfg, cov.names(), levels, census, survey, products, tree, conc, pcp);
  write_sim_bundle(join_path(o.fit_out, "sim_bundle.json"), bundle);

  manifest.timings_sec["total"] = total.seconds();
  write_manifest(join_path(o.fit_out, "manifest.json"), manifest);

  if (!failed.empty()) {
    std::string names = failed[0];
    for (std::size_t i = 1; i < failed.size(); ++i) names += ", " + failed[i];
    throw_diagnostics("ConvergenceFailed",
                      "convergence checks failed for: " + names +
                          " (outputs were written; see the diagnostics files)");
  }
  return 0;
}

int cmd_simulate(const CliOptions& o) {
  Timer total;
  ensure_dir(o.sim_out);

  ScenarioConfig scenario = ScenarioConfig::load(o.sim_scenario);
  if (o.sim_population > 0) scenario.population_total = o.sim_population;
  scenario.validate();

  SimBundle bundle = read_sim_bundle(join_path(o.sim_draws, "sim_bundle.json"));
  StratumTable census(bundle.census);

  std::vector<std::string> inputs = {o.sim_scenario, join_path(o.sim_draws, "sim_bundle.json")};
  std::optional<DrawSet> sets[7];
  GraphDraws gd;
  const DrawSet** slots[7] = {&gd.food,   &gd.supplements,        &gd.medicines, &gd.market_food,
                              &gd.market_supplements, &gd.market_pcp, &gd.conc_food};
  bool needed[7] = {scenario.source_enabled(Source::Food),
                    scenario.source_enabled(Source::Supplements),
                    scenario.source_enabled(Source::Medicines),
                    scenario.market_presence && scenario.source_enabled(Source::Food),
                    scenario.market_presence && scenario.source_enabled(Source::Supplements),
                    scenario.market_presence && scenario.source_enabled(Source::Pcp),
                    scenario.source_enabled(Source::Food)};
  for (int g = 0; g < 7; ++g) {
    if (!needed[g]) continue;
    std::string path = join_path(o.sim_draws, std::string("draws_") + kGraphNames[g] + ".csv");
    sets[g] = read_draws_csv(path);
    *slots[g] = &*sets[g];
    inputs.push_back(path);
  }

  ExposureCsvWriter writer(join_path(o.sim_out, "exposure_samples.csv"), census);
  SimReport report = simulate_population(
      gd, bundle, census, scenario, o.sim_seed, [&](const ExposureRow& row) { writer(row); },
      resolve_threads(o.threads));
  writer.close();

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.seed = o.sim_seed;
  manifest.config_hash = hash_files_hex(inputs);
  manifest.clamp_count = report.clamps.count;
  manifest.degenerate_pert = report.degenerate_pert;
  manifest.timings_sec["total"] = total.seconds();
  write_manifest(join_path(o.sim_out, "manifest.json"), manifest);

  std::cerr << "simulate: " << report.rows << " rows (" << report.iterations << " iterations x "
            << report.individuals << " individuals) in " << manifest.timings_sec["total"]
            << "s\n";
  return 0;
}

int cmd_summarize(const CliOptions& o) {
  Timer total;
  ensure_dir(o.sum_out);

  SummaryOptions opt;
  opt.ci = o.sum_ci;
  std::vector<std::string> probe_text = split_list(o.sum_probes);
  if (!probe_text.empty()) {
    opt.probes.clear();
    for (const std::string& p : probe_text) opt.probes.push_back(parse_probe(p));
  }
  opt.group_by = split_list(o.sum_group_by);
  opt.validate();

  SummaryResult result = summarize_exposure(o.sum_samples, opt);
  write_summary_files(o.sum_out, result);

  RunManifest manifest;
  manifest.command = "summarize";
  manifest.config_hash = hash_files_hex({o.sum_samples});
  manifest.timings_sec["total"] = total.seconds();
  write_manifest(join_path(o.sum_out, "manifest.json"), manifest);

  std::cerr << "summarize: " << result.iterations << " iterations x " << result.individuals
            << " individuals in " << manifest.timings_sec["total"] << "s\n";
  return 0;
}

int cmd_synth(const CliOptions& o) {
  Timer total;
  ensure_dir(o.synth_out);

  std::string truth_path = o.synth_truth;
  if (truth_path.empty()) {
    truth_path = join_path(o.synth_out, "default_truth.json");
    write_text_file(truth_path, default_truth_text());
  }
  SynthOutput out = run_synth(truth_path, o.synth_seed, o.synth_out);

  RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = o.synth_seed;
  manifest.config_hash = hash_files_hex({truth_path});
  manifest.timings_sec["total"] = total.seconds();
  write_manifest(join_path(o.synth_out, "manifest.json"), manifest);

  std::cerr << "synth: " << out.survey_rows << " survey rows, " << out.medicine_rows
            << " medicine rows, " << out.missing_weights << " masked weights\n";
  return 0;
}

int cmd_oracle(const CliOptions& o) {
  Timer total;
  fs::path parent = fs::path(o.orc_out).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());

  OracleResult result = oracle_run(o.orc_truth, o.orc_scenario, o.orc_seed);
  write_oracle_file(o.orc_out, result);

  RunManifest manifest;
  manifest.command = "oracle";
  manifest.seed = o.orc_seed;
  manifest.config_hash = hash_files_hex({o.orc_truth, o.orc_scenario});
  manifest.timings_sec["total"] = total.seconds();
  write_manifest(o.orc_out + ".manifest.json", manifest);

  std::cerr << "oracle: " << result.samples << " samples, p50 " << result.p50 << "\n";
  return 0;
}

}  // namespace

std::vector<std::array<std::string, 3>> cli_option_docs() {
  CLI::App app{"aggrex"};
  CliOptions opts;
  build_app(app, opts);
  std::vector<std::array<std::string, 3>> docs;
  const CLI::App& capp = app;
  for (const CLI::Option* opt : capp.get_options())
    docs.push_back(std::array<std::string, 3>{"", opt->get_name(), opt->get_description()});
  for (const CLI::App* sub : capp.get_subcommands({}))
    for (const CLI::Option* opt : sub->get_options())
      docs.push_back(
          std::array<std::string, 3>{sub->get_name(), opt->get_name(), opt->get_description()});
  return docs;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"aggrex"};
  CliOptions opts;
  Subcommands sub = build_app(app, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sub.fit->parsed()) return cmd_fit(opts);
    if (sub.simulate->parsed()) return cmd_simulate(opts);
    if (sub.summarize->parsed()) return cmd_summarize(opts);
    if (sub.synth->parsed()) return cmd_synth(opts);
    if (sub.oracle->parsed()) return cmd_oracle(opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace aggrex
