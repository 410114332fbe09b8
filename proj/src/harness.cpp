#include "slt/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slt/criteria.hpp"
#include "slt/io.hpp"
#include "slt/mathutil.hpp"
#include "slt/parallel.hpp"
#include "slt/rlct.hpp"

namespace fs = std::filesystem;

namespace slt {

namespace {

constexpr std::uint64_t kChainsTag = 0x6331ULL;   // "c1"
constexpr std::uint64_t kWbicTag = 0x7762ULL;     // "wb"
constexpr std::uint64_t kTiTag = 0x7469ULL;       // "ti"
constexpr std::uint64_t kLwTag = 0x6c77ULL;       // "lw"
constexpr std::uint64_t kLvTag = 0x6c76ULL;       // "lv"
constexpr std::uint64_t kGTestTag = 0x74657374ULL;  // "test"

const char* kRawHeader = "model,n,replicate,estimator,value,mcse";

const std::set<std::string>& valid_estimators() {
  static const std::set<std::string> v{"T",    "C",    "W",           "G",
                                       "WBIC", "F_TI", "sBIC",        "nu",
                                       "lambda_wbic", "lambda_volume"};
  return v;
}

struct RawRow {
  std::string model;
  int n = 0;
  int replicate = 0;
  std::string estimator;
  double value = 0.0;
  double mcse = 0.0;
};

std::string row_to_csv(const RawRow& r) {
  return r.model + "," + std::to_string(r.n) + "," +
         std::to_string(r.replicate) + "," + r.estimator + "," +
         format_double(r.value) + "," + format_double(r.mcse);
}

std::string normalized(const std::string& name) {
  std::string out;
  for (char c : name)
    if (c != '_' && c != '-')
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

std::uint64_t replicate_seed(std::uint64_t master, int n, int replicate) {
  return mix_seed(mix_seed(master, static_cast<std::uint64_t>(n)),
                  static_cast<std::uint64_t>(replicate));
}

ModelSpec model_from_config(const ExperimentConfig& config) {
  std::string key = normalized(config.model_name);
  if (key == "productmean") return product_mean();
  if (key == "productmeanscaled") return product_mean_scaled(config.model_c);
  if (key == "gaussianmixture2" || key == "mixture") return gaussian_mixture2();
  if (key == "conjugatenormal" || key == "conjugate")
    return conjugate_normal(config.model_sigma0);
  if (key == "regulargaussian" || key == "regular")
    return regular_gaussian(config.model_d,
                            std::vector<double>(config.model_d, 0.0));
  if (key.rfind("regulargaussian", 0) == 0) {
    int d = std::stoi(key.substr(std::string("regulargaussian").size()));
    return regular_gaussian(d, std::vector<double>(d, 0.0));
  }
  return make_model(config.model_name);
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (j.at("model").is_string()) {
      c.model_name = j["model"].get<std::string>();
    } else {
      const auto& m = j.at("model");
      c.model_name = m.at("name").get<std::string>();
      if (m.contains("d")) c.model_d = m["d"].get<int>();
      if (m.contains("sigma0")) c.model_sigma0 = m["sigma0"].get<double>();
      if (m.contains("c")) c.model_c = m["c"].get<double>();
    }
    c.n_values = j.at("n_values").get<std::vector<int>>();
    c.replicates = j.at("replicates").get<int>();
    c.estimators = j.at("estimators").get<std::vector<std::string>>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir"))
      c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("test_n")) c.test_n = j["test_n"].get<int>();
    if (j.contains("eps_grid"))
      c.eps_grid = j["eps_grid"].get<std::vector<double>>();
    if (j.contains("prior_samples"))
      c.prior_samples = j["prior_samples"].get<long long>();
    if (j.contains("mcmc")) {
      const auto& m = j["mcmc"];
      if (m.contains("chains")) c.mcmc.chains = m["chains"].get<int>();
      if (m.contains("warmup")) c.mcmc.warmup = m["warmup"].get<int>();
      if (m.contains("draws_per_chain"))
        c.mcmc.draws_per_chain = m["draws_per_chain"].get<int>();
      if (m.contains("initial_step"))
        c.mcmc.initial_step = m["initial_step"].get<double>();
      if (m.contains("target_accept"))
        c.mcmc.target_accept = m["target_accept"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config field error: ") + e.what());
  }
  if (c.n_values.empty())
    throw std::invalid_argument("config: n_values must be nonempty");
  if (c.replicates < 1)
    throw std::invalid_argument("config: replicates must be >= 1");
  if (c.estimators.empty())
    throw std::invalid_argument("config: estimators must be nonempty");
  for (const auto& e : c.estimators)
    if (!valid_estimators().count(e))
      throw std::invalid_argument("config: unknown estimator '" + e + "'");
  if (c.eps_grid.empty())
    for (int k = 0; k < 7; ++k) c.eps_grid.push_back(std::pow(10.0, -1.0 - k / 3.0));
  return c;
}

namespace {

bool wants(const ExperimentConfig& c, const std::string& e) {
  return std::find(c.estimators.begin(), c.estimators.end(), e) !=
         c.estimators.end();
}

std::string config_fingerprint(const ExperimentConfig& c) {
  std::ostringstream s;
  s << c.model_name << '|' << c.model_d << '|' << c.model_sigma0 << '|'
    << c.model_c << '|';
  for (int n : c.n_values) s << n << ',';
  s << '|' << c.replicates << '|' << c.mcmc.chains << '|' << c.mcmc.warmup
    << '|' << c.mcmc.draws_per_chain << '|' << c.mcmc.initial_step << '|'
    << c.mcmc.target_accept << '|';
  for (const auto& e : c.estimators) s << e << ',';
  s << '|' << c.master_seed << '|' << c.test_n << '|';
  for (double e : c.eps_grid) s << e << ',';
  s << '|' << c.prior_samples;
  return fnv1a_hex(s.str());
}

std::vector<RawRow> compute_replicate(const ModelSpec& model,
                                      const ExperimentConfig& config, int n,
                                      int r) {
  std::uint64_t seed = replicate_seed(config.master_seed, n, r);
  Dataset data = sample_true(model, n, seed);
  std::vector<RawRow> rows;
  auto push = [&](const std::string& est, double v, double m) {
    rows.push_back({model.name, n, r, est, v, m});
  };

  bool need_chains = wants(config, "T") || wants(config, "C") ||
                     wants(config, "W") || wants(config, "G") ||
                     wants(config, "nu");
  ChainSet chains;
  if (need_chains) {
    McmcConfig cfg = config.mcmc;
    cfg.beta = 1.0;
    cfg.ladder.clear();
    cfg.seed = mix_seed(seed, kChainsTag);
    chains = run_mcmc(model, data, cfg);
  }
  bool have_waic = false;
  WaicResult wa;
  auto waic_once = [&]() {
    if (!have_waic) {
      wa = waic(chains, model, data);
      have_waic = true;
    }
  };

  for (const auto& est : config.estimators) {
    if (est == "T") {
      LossStats s = cumulant_stats(chains, model, data, 1.0);
      push("T", -s.value, s.mcse);
    } else if (est == "C") {
      LossStats s = cumulant_stats(chains, model, data, -1.0);
      push("C", s.value, s.mcse);
    } else if (est == "W") {
      waic_once();
      LossStats t = cumulant_stats(chains, model, data, 1.0);
      push("W", wa.w_n, std::sqrt(t.mcse * t.mcse + wa.v_mcse * wa.v_mcse));
    } else if (est == "G") {
      LossStats s = generalization_loss_stats(chains, model, config.test_n,
                                              mix_seed(seed, kGTestTag));
      push("G", s.value, s.mcse);
    } else if (est == "nu") {
      waic_once();
      push("nu", 0.5 * n * wa.v_term, 0.5 * n * wa.v_mcse);
    } else if (est == "WBIC") {
      McmcConfig cfg = config.mcmc;
      cfg.seed = mix_seed(seed, kWbicTag);
      WbicResult w = wbic(model, data, cfg);
      push("WBIC", w.value, w.mcse);
    } else if (est == "F_TI") {
      McmcConfig cfg = config.mcmc;
      cfg.seed = mix_seed(seed, kTiTag);
      TiResult ti = free_energy_ti(model, data, ti_default_ladder(), cfg);
      push("F_TI", ti.value, ti.mcse);
    } else if (est == "sBIC") {
      push("sBIC", sbic(model, data, *model.known_lambda), 0.0);
    } else if (est == "lambda_wbic") {
      McmcConfig cfg = config.mcmc;
      cfg.seed = mix_seed(seed, kLwTag);
      double mcse = 0.0;
      double v = two_temperature_lambda(model, data, cfg, &mcse);
      push("lambda_wbic", v, mcse);
    } else if (est == "lambda_volume") {
      LambdaEstimate le = estimate_rlct_volume(
          model, config.eps_grid, config.prior_samples, mix_seed(seed, kLvTag));
      push("lambda_volume", le.lambda, le.stderr_);
    }
  }

  bool need_ln0 = static_cast<int>(model.theta0.size()) == model.dim &&
                  (wants(config, "T") || wants(config, "C") ||
                   wants(config, "W") || wants(config, "G") ||
                   wants(config, "F_TI") || wants(config, "WBIC"));
  if (need_ln0)
    push("Ln0", empirical_loss(model, data, model.theta0.data()), 0.0);
  return rows;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  write_text_file(tmp, content);
  fs::rename(tmp, path);
}

std::string part_path(const std::string& dir, int n, int r) {
  return dir + "/parts/part_n" + std::to_string(n) + "_r" + std::to_string(r) +
         ".csv";
}

std::string part_content(const std::string& fingerprint,
                         const std::vector<RawRow>& rows) {
  std::string s = "#cfg=" + fingerprint + "\n" + kRawHeader + "\n";
  for (const auto& r : rows) s += row_to_csv(r) + "\n";
  return s;
}

bool parse_part(const std::string& path, const std::string& fingerprint,
                int n, int r, std::vector<RawRow>& out) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (...) {
    return false;
  }
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "#cfg=" + fingerprint) return false;
  if (!std::getline(in, line) || line != kRawHeader) return false;
  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    RawRow row;
    std::string field;
    if (!std::getline(ls, row.model, ',')) return false;
    if (!std::getline(ls, field, ',')) return false;
    row.n = std::atoi(field.c_str());
    if (!std::getline(ls, field, ',')) return false;
    row.replicate = std::atoi(field.c_str());
    if (!std::getline(ls, row.estimator, ',')) return false;
    if (!std::getline(ls, field, ',')) return false;
    row.value = std::atof(field.c_str());
    if (!std::getline(ls, field, ',')) return false;
    row.mcse = std::atof(field.c_str());
    if (row.n != n || row.replicate != r) return false;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return false;
  out = std::move(rows);
  return true;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, bool resume) {
  if (config.output_dir.empty())
    throw std::invalid_argument("config: output_dir required");
  ModelSpec model = model_from_config(config);
  if (wants(config, "sBIC") && !model.known_lambda)
    throw std::invalid_argument(
        "config: sBIC needs a model with a known lambda");
  if (wants(config, "lambda_volume") && !model.analytic_K)
    throw std::invalid_argument(
        "config: lambda_volume needs a model with analytic K");

  fs::create_directories(config.output_dir + "/parts");
  std::string fingerprint = config_fingerprint(config);

  const int num_n = static_cast<int>(config.n_values.size());
  const int cells = num_n * config.replicates;
  std::vector<std::vector<RawRow>> cell_rows(cells);
  std::vector<std::string> cell_errors(cells);

  parallel_for(cells, [&](std::size_t cell) {
    int ni = static_cast<int>(cell) / config.replicates;
    int r = static_cast<int>(cell) % config.replicates;
    int n = config.n_values[ni];
    std::string path = part_path(config.output_dir, n, r);
    std::vector<RawRow> rows;
    if (resume && parse_part(path, fingerprint, n, r, rows)) {
      cell_rows[cell] = std::move(rows);
      return;
    }
    try {
      rows = compute_replicate(model, config, n, r);
    } catch (const std::exception& e) {
      cell_errors[cell] = e.what();
      return;
    }
    atomic_write(path, part_content(fingerprint, rows));
    cell_rows[cell] = std::move(rows);
  });

  ExperimentSummary summary;
  for (int cell = 0; cell < cells; ++cell)
    if (!cell_errors[cell].empty()) {
      ++summary.failures;
      int ni = cell / config.replicates;
      std::fprintf(stderr, "warning: replicate n=%d r=%d failed: %s\n",
                   config.n_values[ni], cell % config.replicates,
                   cell_errors[cell].c_str());
    }
  if (summary.failures * 10 > cells)
    throw std::runtime_error("more than 10% of replicates failed");

  // raw.csv in deterministic (n, replicate, estimator) order
  std::string raw = std::string(kRawHeader) + "\n";
  std::vector<const RawRow*> all;
  for (int cell = 0; cell < cells; ++cell)
    for (const auto& row : cell_rows[cell]) {
      raw += row_to_csv(row) + "\n";
      all.push_back(&row);
    }
  atomic_write(config.output_dir + "/raw.csv", raw);

  // summary recomputed from the raw rows, first-appearance order
  std::vector<std::pair<int, std::string>> order;
  std::map<std::pair<int, std::string>, std::vector<double>> groups;
  for (const RawRow* row : all) {
    auto key = std::make_pair(row->n, row->estimator);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(row->value);
  }
  std::string summary_csv = "model,n,estimator,mean,stderr,count\n";
  for (const auto& key : order) {
    const auto& vals = groups[key];
    SummaryRow s;
    s.model = model.name;
    s.n = key.first;
    s.estimator = key.second;
    s.mean = mean_of(vals);
    s.stderr_ = stderr_of_mean(vals);
    s.count = static_cast<int>(vals.size());
    summary.rows.push_back(s);
    summary_csv += s.model + "," + std::to_string(s.n) + "," + s.estimator +
                   "," + format_double(s.mean) + "," + format_double(s.stderr_) +
                   "," + std::to_string(s.count) + "\n";
  }
  atomic_write(config.output_dir + "/summary.csv", summary_csv);

  // derived lambda laws (predicted vs observed)
  double target = model.known_lambda ? *model.known_lambda
                                     : std::numeric_limits<double>::quiet_NaN();
  auto values_of = [&](int n, const std::string& est) {
    auto it = groups.find(std::make_pair(n, est));
    return it == groups.end() ? std::vector<double>{} : it->second;
  };
  for (int n : config.n_values) {
    std::vector<double> ln0 = values_of(n, "Ln0");
    if (model.analytic_L0) {
      std::vector<double> g = values_of(n, "G");
      if (!g.empty()) {
        std::vector<double> d(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
          d[i] = n * (g[i] - *model.analytic_L0);
        summary.derived.push_back({model.name, "lambda_from_G", n, mean_of(d),
                                   stderr_of_mean(d), target});
      }
    }
    for (const char* est : {"W", "C"}) {
      std::vector<double> v = values_of(n, est);
      if (v.empty() || v.size() != ln0.size()) continue;
      std::vector<double> d(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) d[i] = n * (v[i] - ln0[i]);
      summary.derived.push_back({model.name,
                                 std::string("lambda_from_") + est, n,
                                 mean_of(d), stderr_of_mean(d), target});
    }
    for (const char* est : {"lambda_wbic", "lambda_volume"}) {
      std::vector<double> v = values_of(n, est);
      if (v.empty()) continue;
      summary.derived.push_back({model.name, est, n, mean_of(v),
                                 stderr_of_mean(v), target});
    }
  }
  if (config.n_values.size() >= 2) {
    std::vector<double> xs, ys;
    for (int n : config.n_values) {
      std::vector<double> f = values_of(n, "F_TI");
      std::vector<double> ln0 = values_of(n, "Ln0");
      if (f.empty() || f.size() != ln0.size()) continue;
      std::vector<double> d(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) d[i] = f[i] - n * ln0[i];
      xs.push_back(std::log(static_cast<double>(n)));
      ys.push_back(mean_of(d));
    }
    if (xs.size() >= 2) {
      LineFit fit = ols_fit(xs, ys);
      summary.derived.push_back({model.name, "lambda_from_F", 0, fit.slope,
                                 fit.slope_se, target});
    }
  }
  std::string derived_csv = "model,law,n,lambda_hat,stderr,target\n";
  for (const auto& d : summary.derived) {
    derived_csv += d.model + "," + d.law + "," + std::to_string(d.n) + "," +
                   format_double(d.lambda_hat) + "," +
                   format_double(d.stderr_) + ",";
    if (!std::isnan(d.target)) derived_csv += format_double(d.target);
    derived_csv += "\n";
  }
  atomic_write(config.output_dir + "/derived.csv", derived_csv);

  // manifest with content hashes over every produced file
  nlohmann::json manifest;
  manifest["master_seed"] = config.master_seed;
  manifest["config_fingerprint"] = fingerprint;
  nlohmann::json files = nlohmann::json::object();
  std::vector<std::string> rels{"raw.csv", "summary.csv", "derived.csv"};
  for (int cell = 0; cell < cells; ++cell) {
    if (!cell_errors[cell].empty()) continue;
    int ni = cell / config.replicates;
    int n = config.n_values[ni];
    int r = cell % config.replicates;
    rels.push_back("parts/part_n" + std::to_string(n) + "_r" +
                   std::to_string(r) + ".csv");
  }
  for (const auto& rel : rels)
    files[rel] = fnv1a_hex(read_text_file(config.output_dir + "/" + rel));
  manifest["files"] = files;
  atomic_write(config.output_dir + "/manifest.json", manifest.dump(2));
  return summary;
}

}  // namespace slt
