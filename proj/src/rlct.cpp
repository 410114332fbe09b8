#include "slt/rlct.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "json.hpp"
#include "slt/mathutil.hpp"
#include "slt/parallel.hpp"

namespace slt {

RlctResult rlct_of_charts(const std::vector<NormalCrossingChart>& charts) {
  if (charts.empty()) throw std::invalid_argument("no charts");
  bool have = false;
  Rational best(0, 1);
  int m = 1;
  for (const auto& chart : charts) {
    if (chart.k.size() != chart.h.size() || chart.k.empty())
      throw std::invalid_argument("chart k/h size mismatch");
    bool any_positive = false;
    for (std::size_t j = 0; j < chart.k.size(); ++j) {
      if (chart.k[j] < 0 || chart.h[j] < 0)
        throw std::invalid_argument("chart entries must be nonnegative");
      if (chart.k[j] > 0) any_positive = true;
    }
    if (!any_positive)
      throw std::invalid_argument("chart needs at least one positive k");

    bool chart_have = false;
    Rational chart_lambda(0, 1);
    for (std::size_t j = 0; j < chart.k.size(); ++j) {
      if (chart.k[j] == 0) continue;  // (h+1)/(2k) = infinity
      Rational cand(chart.h[j] + 1, 2LL * chart.k[j]);
      if (!chart_have || cand < chart_lambda) {
        chart_lambda = cand;
        chart_have = true;
      }
    }
    int count = 0;
    for (std::size_t j = 0; j < chart.k.size(); ++j)
      if (chart.k[j] > 0 &&
          Rational(chart.h[j] + 1, 2LL * chart.k[j]) == chart_lambda)
        ++count;

    if (!have || chart_lambda < best) {
      best = chart_lambda;
      m = count;
      have = true;
    } else if (chart_lambda == best) {
      m = std::max(m, count);
    }
  }
  return {best, m};
}

Rational rlct_sum(const std::vector<RlctResult>& parts) {
  if (parts.empty()) throw std::invalid_argument("empty composition");
  Rational total(0, 1);
  for (const auto& p : parts) total = total + p.lambda;
  return total;
}

Rational rlct_product(const std::vector<RlctResult>& parts) {
  if (parts.empty()) throw std::invalid_argument("empty composition");
  Rational best = parts[0].lambda;
  for (const auto& p : parts)
    if (p.lambda < best) best = p.lambda;
  return best;
}

std::vector<NormalCrossingChart> charts_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array()) throw std::invalid_argument("chart JSON must be an array");
  std::vector<NormalCrossingChart> charts;
  for (const auto& item : j) {
    NormalCrossingChart c;
    c.k = item.at("k").get<std::vector<int>>();
    c.h = item.at("h").get<std::vector<int>>();
    charts.push_back(std::move(c));
  }
  return charts;
}

std::string rlct_result_json(const RlctResult& r) {
  nlohmann::json j;
  j["lambda"] = {{"num", r.lambda.num}, {"den", r.lambda.den}};
  j["decimal"] = r.lambda.to_double();
  j["m"] = r.m;
  return j.dump(2);
}

double two_temperature_lambda(const ModelSpec& model, const Dataset& data,
                              const McmcConfig& config, double* mcse_out) {
  if (data.n < 20)
    throw std::invalid_argument("two_temperature_lambda needs n >= 20");
  double logn = std::log(static_cast<double>(data.n));
  double betas[2] = {1.0 / logn, 1.5 / logn};
  auto llsum = make_loglik_sum(model, data);
  auto nln = [&](const double* th) { return -llsum(th); };
  double e[2], se[2];
  for (int t = 0; t < 2; ++t) {
    McmcConfig cfg = config;
    cfg.ladder.clear();
    cfg.beta = betas[t];
    cfg.seed = mix_seed(config.seed, static_cast<std::uint64_t>(t + 1));
    ChainSet chains = run_mcmc(model, data, cfg);
    std::tie(e[t], se[t]) = posterior_expectation(chains, nln);
  }
  double denom = 1.0 / betas[0] - 1.0 / betas[1];
  if (mcse_out)
    *mcse_out = std::sqrt(se[0] * se[0] + se[1] * se[1]) / denom;
  return (e[0] - e[1]) / denom;
}

LambdaEstimate estimate_rlct_wbic(const ModelSpec& model, int n,
                                  int replicates, const McmcConfig& config) {
  if (n < 20) throw std::invalid_argument("estimate_rlct_wbic needs n >= 20");
  if (replicates < 10)
    throw std::invalid_argument("estimate_rlct_wbic needs >= 10 replicates");
  std::vector<double> lambdas(replicates, 0.0);
  parallel_for(replicates, [&](std::size_t r) {
    std::uint64_t rep_seed = mix_seed(
        mix_seed(config.seed, static_cast<std::uint64_t>(n)), r);
    Dataset data = sample_true(model, n, rep_seed);
    McmcConfig cfg = config;
    cfg.seed = rep_seed;
    lambdas[r] = two_temperature_lambda(model, data, cfg);
  });
  return {mean_of(lambdas), stderr_of_mean(lambdas)};
}

LambdaEstimate estimate_rlct_volume(const ModelSpec& model,
                                    const std::vector<double>& eps_grid,
                                    long long prior_samples,
                                    std::uint64_t seed) {
  if (!model.analytic_K)
    throw std::invalid_argument("volume estimator needs analytic K");
  if (eps_grid.size() < 3) throw std::invalid_argument("eps grid too small");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0))
      throw std::invalid_argument("eps grid must be positive");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))
      throw std::invalid_argument("eps grid must be strictly decreasing");
  }
  if (prior_samples < 100000)
    throw std::invalid_argument("volume estimator needs >= 1e5 samples");

  constexpr int kBatches = 16;
  const std::size_t g = eps_grid.size();
  // hit counts per (batch, eps)
  std::vector<std::vector<long long>> hits(
      kBatches, std::vector<long long>(g, 0));
  std::vector<long long> batch_sizes(kBatches, 0);

  parallel_for(kBatches, [&](std::size_t b) {
    Rng rng(mix_seed(seed, 0x766f6cULL + b));  // "vol" + batch
    long long count = prior_samples / kBatches +
                      (static_cast<long long>(b) < prior_samples % kBatches
                           ? 1
                           : 0);
    batch_sizes[b] = count;
    std::vector<double> theta(model.dim);
    for (long long s = 0; s < count; ++s) {
      model.sample_prior(rng, theta.data());
      double kv = model.analytic_K(theta.data());
      for (std::size_t i = 0; i < g; ++i) {
        if (kv < eps_grid[i])
          ++hits[b][i];
        else
          break;  // grid is decreasing, later eps are smaller
      }
    }
  });

  std::vector<long long> total(g, 0);
  for (int b = 0; b < kBatches; ++b)
    for (std::size_t i = 0; i < g; ++i) total[i] += hits[b][i];

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < g; ++i)
    if (total[i] >= 100) usable.push_back(i);
  if (usable.size() < 3)
    throw std::runtime_error("insufficient tail resolution");

  double n_total = static_cast<double>(prior_samples);
  std::vector<double> xs, ys;
  for (std::size_t i : usable) {
    xs.push_back(std::log(eps_grid[i]));
    ys.push_back(std::log(total[i] / n_total));
  }
  LineFit fit = ols_fit(xs, ys);

  std::vector<double> batch_slopes;
  for (int b = 0; b < kBatches; ++b) {
    std::vector<double> bx, by;
    for (std::size_t i : usable) {
      if (hits[b][i] <= 0) continue;
      bx.push_back(std::log(eps_grid[i]));
      by.push_back(std::log(hits[b][i] / static_cast<double>(batch_sizes[b])));
    }
    if (bx.size() >= 2) batch_slopes.push_back(ols_fit(bx, by).slope);
  }
  double se = batch_slopes.size() >= 2 ? stderr_of_mean(batch_slopes)
                                       : fit.slope_se;
  return {fit.slope, se};
}

}  // namespace slt
