#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slt/model.hpp"
#include "slt/sampler.hpp"

namespace slt {

// JSON-driven experiment description; see README for the schema.
struct ExperimentConfig {
  std::string model_name;
  int model_d = 1;          // regular_gaussian dimension
  double model_sigma0 = 1.0;  // conjugate_normal prior sd
  double model_c = 2.0;       // product_mean_scaled factor
  std::vector<int> n_values;
  int replicates = 1;
  McmcConfig mcmc;
  std::vector<std::string> estimators;
  std::uint64_t master_seed = 0;
  std::string output_dir;
  int test_n = 100000;
  std::vector<double> eps_grid;     // lambda_volume; default geometric 1e-1..1e-3
  long long prior_samples = 1000000;
};

ExperimentConfig config_from_json(const std::string& text);
ModelSpec model_from_config(const ExperimentConfig& config);

// replicate seed = mix_seed(mix_seed(master, n), replicate)
std::uint64_t replicate_seed(std::uint64_t master, int n, int replicate);

struct SummaryRow {
  std::string model;
  int n = 0;
  std::string estimator;
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

struct DerivedRow {
  std::string model;
  std::string law;
  int n = 0;  // 0 = pooled across n (slope laws)
  double lambda_hat = 0.0;
  double stderr_ = 0.0;
  double target = 0.0;  // known lambda, NaN when unknown
};

struct ExperimentSummary {
  std::vector<SummaryRow> rows;
  std::vector<DerivedRow> derived;
  int failures = 0;
};

// Runs every (n, replicate) cell, persists one part file per replicate plus
// raw.csv / summary.csv / derived.csv / manifest.json under output_dir.
// Valid part files (config fingerprint + hash) are reused when resume is on.
// Aborts when more than 10% of replicates fail.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 bool resume = true);

}  // namespace slt
