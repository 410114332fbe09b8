#include "slt/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slt/criteria.hpp"
#include "slt/harness.hpp"
#include "slt/io.hpp"
#include "slt/mathutil.hpp"
#include "slt/parallel.hpp"
#include "slt/renormalized.hpp"
#include "slt/rlct.hpp"
#include "slt/sampler.hpp"

namespace slt {

namespace {

// Raised for bad configuration discovered after flag parsing (exit 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  std::string name = "product_mean";
  int d = 1;
  double sigma0 = 1.0;
  double c = 2.0;

  ModelSpec build() const {
    ExperimentConfig cfg;
    cfg.model_name = name;
    cfg.model_d = d;
    cfg.model_sigma0 = sigma0;
    cfg.model_c = c;
    try {
      return model_from_config(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
  cmd->add_option("--model", m.name, "model name");
  cmd->add_option("--d", m.d, "regular_gaussian dimension");
  cmd->add_option("--sigma0", m.sigma0, "conjugate_normal prior sd");
  cmd->add_option("--c", m.c, "product_mean_scaled factor");
}

void add_mcmc_flags(CLI::App* cmd, McmcConfig& m) {
  cmd->add_option("--chains", m.chains, "number of chains");
  cmd->add_option("--draws", m.draws_per_chain, "retained draws per chain");
  cmd->add_option("--warmup", m.warmup, "warmup sweeps (-1 = draws/2)");
  cmd->add_option("--beta", m.beta, "inverse temperature");
}

int run_gen(const ModelFlags& mf, int n, std::uint64_t seed,
            const std::string& out) {
  ModelSpec model = mf.build();
  Dataset data = sample_true(model, n, seed);
  write_dataset_csv(data, out);
  std::printf("wrote %s (%d rows)\n", out.c_str(), data.n);
  return 0;
}

int run_sample(const ModelFlags& mf, int n, std::uint64_t seed,
               const McmcConfig& mcmc, const std::string& out) {
  ModelSpec model = mf.build();
  Dataset data = sample_true(model, n, seed);
  McmcConfig cfg = mcmc;
  cfg.seed = seed;
  ChainSet chains = run_mcmc(model, data, cfg);
  write_chains_csv(chains, out);
  Diagnostics diag = diagnostics(chains);
  write_text_file(out + ".diagnostics.json", diagnostics_json(diag) + "\n");
  double acc = mean_of(chains.accept_rate);
  std::printf("wrote %s (%d chains x %d draws, accept %.2f)\n", out.c_str(),
              chains.chains, chains.iters, acc);
  return 0;
}

int run_criteria(const ModelFlags& mf, int n, std::uint64_t seed,
                 const McmcConfig& mcmc, int test_n, const std::string& out) {
  ModelSpec model = mf.build();
  Dataset data = sample_true(model, n, seed);
  McmcConfig cfg = mcmc;
  cfg.seed = seed;
  CriteriaReport report = criteria_report(model, data, cfg, test_n);
  std::string json = report_json(report);
  if (!out.empty()) write_text_file(out, json + "\n");
  std::printf("%s\n", json.c_str());
  return 0;
}

int run_wbic(const ModelFlags& mf, int n, std::uint64_t seed,
             const McmcConfig& mcmc, double beta_override) {
  ModelSpec model = mf.build();
  Dataset data = sample_true(model, n, seed);
  McmcConfig cfg = mcmc;
  cfg.seed = seed;
  WbicResult r = wbic(model, data, cfg, beta_override);
  nlohmann::json j{{"WBIC", r.value}, {"mcse", r.mcse}, {"beta", r.beta}};
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int run_rlct(const std::string& charts_path, const std::string& out) {
  std::vector<NormalCrossingChart> charts;
  try {
    charts = charts_from_json(read_text_file(charts_path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("charts: ") + e.what());
  }
  RlctResult r = rlct_of_charts(charts);
  if (!out.empty()) write_text_file(out, rlct_result_json(r) + "\n");
  if (r.lambda.den == 1)
    std::printf("lambda=%lld m=%d\n", r.lambda.num, r.m);
  else
    std::printf("lambda=%lld/%lld m=%d\n", r.lambda.num, r.lambda.den, r.m);
  return 0;
}

int run_renorm(const std::string& grid_path, int draws, std::uint64_t seed,
               const std::string& out) {
  ChartGrid grid;
  try {
    grid = grid_from_json(read_text_file(grid_path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  IdentityCheck ic;
  bool has_cov = !grid.covariance.empty();
  if (has_cov) ic = functional_identity_check(grid, draws, seed);
  double max_residual = 0.0;
  for (int r = 0; r < 100; ++r) {
    XiField xi;
    if (has_cov)
      xi = sample_xi(grid, mix_seed(seed, 1000 + r));
    else
      xi.values.assign(grid.nodes(), 0.0);
    for (double alpha : {1.0, 1.5, 2.0, 3.0})
      max_residual = std::max(max_residual,
                              check_partial_integration(alpha, xi, grid));
    if (!has_cov) break;
  }
  nlohmann::json j;
  if (has_cov)
    j = {{"lhs", ic.lhs},
         {"rhs", ic.rhs},
         {"stderr", ic.stderr_},
         {"max_partial_integration_residual", max_residual}};
  else
    j = {{"max_partial_integration_residual", max_residual}};
  if (!out.empty()) write_text_file(out, j.dump(2) + "\n");
  std::printf("%s\n", j.dump(2).c_str());
  return 0;
}

int run_experiment_cmd(const std::string& config_path, const std::string& out,
                       std::uint64_t seed, bool seed_set, bool resume) {
  ExperimentConfig config;
  try {
    config = config_from_json(read_text_file(config_path));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!out.empty()) config.output_dir = out;
  if (seed_set) config.master_seed = seed;
  if (config.output_dir.empty())
    throw ConfigError("config: output_dir required (or pass --out)");
  ExperimentSummary s = run_experiment(config, resume);
  std::printf("wrote %s/summary.csv (%zu rows, %d failures)\n",
              config.output_dir.c_str(), s.rows.size(), s.failures);
  return 0;
}

}  // namespace

int cli_dispatch(int argc, char** argv) {
  CLI::App app{"singular-learning criteria toolkit"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "worker threads")->capture_default_str();

  ModelFlags mf;
  int n = 100;
  std::uint64_t seed = 0;
  std::string out;
  McmcConfig mcmc;
  int test_n = 100000;
  double beta_override = -1.0;
  std::string charts_path, grid_path, config_path;
  int renorm_draws = 10000;
  bool resume = true;

  CLI::App* gen = app.add_subcommand("gen", "write a dataset CSV");
  add_model_flags(gen, mf);
  gen->add_option("--n", n, "sample size")->required();
  gen->add_option("--seed", seed, "dataset seed");
  gen->add_option("--out", out, "output CSV path")->required();

  CLI::App* sample = app.add_subcommand("sample", "run the sampler");
  add_model_flags(sample, mf);
  add_mcmc_flags(sample, mcmc);
  sample->add_option("--n", n, "sample size")->required();
  sample->add_option("--seed", seed, "seed");
  sample->add_option("--out", out, "chains CSV path")->required();

  CLI::App* crit = app.add_subcommand("criteria", "full criteria report");
  add_model_flags(crit, mf);
  add_mcmc_flags(crit, mcmc);
  crit->add_option("--n", n, "sample size")->required();
  crit->add_option("--seed", seed, "seed");
  crit->add_option("--test-n", test_n, "test draws for G_n");
  crit->add_option("--out", out, "also write report JSON here");

  CLI::App* wb = app.add_subcommand("wbic", "E_beta[n L_n] at 1/log n");
  add_model_flags(wb, mf);
  add_mcmc_flags(wb, mcmc);
  wb->add_option("--n", n, "sample size")->required();
  wb->add_option("--seed", seed, "seed");
  wb->add_option("--beta-override", beta_override,
                 "evaluate at this beta instead of 1/log n");

  CLI::App* rl = app.add_subcommand("rlct", "chart algebra");
  rl->add_option("charts", charts_path, "charts JSON file")->required();
  rl->add_option("--out", out, "also write result JSON here");

  CLI::App* rn = app.add_subcommand("renorm", "renormalized-posterior checks");
  rn->add_option("grid", grid_path, "grid JSON file")->required();
  rn->add_option("--draws", renorm_draws, "xi draws");
  rn->add_option("--seed", seed, "seed");
  rn->add_option("--out", out, "also write result JSON here");

  CLI::App* ex = app.add_subcommand("experiment", "replicated experiment");
  ex->add_option("config", config_path, "experiment config JSON")->required();
  ex->add_option("--out", out, "override output_dir");
  CLI::Option* seed_opt =
      ex->add_option("--seed", seed, "override master_seed");
  ex->add_flag("--resume,!--no-resume", resume,
               "reuse valid per-replicate part files (default on)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  set_jobs(jobs);

  try {
    if (gen->parsed()) return run_gen(mf, n, seed, out);
    if (sample->parsed()) return run_sample(mf, n, seed, mcmc, out);
    if (crit->parsed()) return run_criteria(mf, n, seed, mcmc, test_n, out);
    if (wb->parsed()) return run_wbic(mf, n, seed, mcmc, beta_override);
    if (rl->parsed()) return run_rlct(charts_path, out);
    if (rn->parsed()) return run_renorm(grid_path, renorm_draws, seed, out);
    if (ex->parsed())
      return run_experiment_cmd(config_path, out, seed,
                                seed_opt->count() > 0, resume);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace slt
