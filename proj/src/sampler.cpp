#include "slt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "slt/io.hpp"
#include "slt/mathutil.hpp"
#include "slt/parallel.hpp"

namespace slt {

double reflect_into(double x, double lo, double hi) {
  double width = hi - lo;
  if (width <= 0.0) throw std::invalid_argument("empty box side");
  double period = 2.0 * width;
  double y = std::fmod(x - lo, period);
  if (y < 0.0) y += period;
  return lo + (y <= width ? y : period - y);
}

namespace {

constexpr std::uint64_t kChainTag = 0x636861696eULL;  // "chain"
constexpr std::uint64_t kSwapTag = 0x65786368ULL;     // "exch"

std::vector<double> resolve_ladder(const McmcConfig& config) {
  if (!(config.beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!config.ladder.empty()) {
    for (double b : config.ladder)
      if (!(b > 0.0)) throw std::invalid_argument("ladder rungs must be > 0");
    for (std::size_t i = 1; i < config.ladder.size(); ++i)
      if (!(config.ladder[i] > config.ladder[i - 1]))
        throw std::invalid_argument("ladder must be strictly increasing");
    if (std::fabs(config.ladder.back() - config.beta) > 1e-12)
      throw std::invalid_argument("ladder must end at beta");
    return config.ladder;
  }
  if (config.beta < 1.0)
    return {config.beta / 8.0, config.beta / 4.0, config.beta / 2.0,
            config.beta};
  return {config.beta};
}

void validate(const McmcConfig& config) {
  if (config.chains < 2) throw std::invalid_argument("chains must be >= 2");
  if (config.draws_per_chain < 1)
    throw std::invalid_argument("draws_per_chain must be >= 1");
  if (config.effective_warmup() < 0)
    throw std::invalid_argument("warmup must be >= 0");
  if (!(config.initial_step > 0.0))
    throw std::invalid_argument("initial_step must be > 0");
  if (!(config.target_accept > 0.0 && config.target_accept < 1.0))
    throw std::invalid_argument("target_accept must be in (0,1)");
}

struct Walker {
  std::vector<double> theta;
  double llsum = 0.0;
  double lprior = 0.0;
};

// One tempered stack: a walker per rung plus per-rung adaptive step sizes.
// Runs the full warmup + sampling schedule for a single chain index.
void run_stack(const ModelSpec& model, const Dataset& data,
               const McmcConfig& config, const std::vector<double>& ladder,
               int stack, std::vector<std::vector<double>>& rung_draws,
               double& accept_rate_out) {
  const int dim = model.dim;
  const int rungs = static_cast<int>(ladder.size());
  const int warmup = config.effective_warmup();
  const int retained = config.draws_per_chain;
  auto llsum = make_loglik_sum(model, data);

  std::vector<Rng> rngs;
  rngs.reserve(rungs);
  for (int r = 0; r < rungs; ++r)
    rngs.emplace_back(
        mix_seed(mix_seed(config.seed, kChainTag + static_cast<std::uint64_t>(
                                                       stack)),
                 static_cast<std::uint64_t>(r)));
  Rng swap_rng(mix_seed(mix_seed(config.seed, kSwapTag),
                        static_cast<std::uint64_t>(stack)));

  std::vector<Walker> walkers(rungs);
  for (int r = 0; r < rungs; ++r) {
    walkers[r].theta.resize(dim);
    model.sample_prior(rngs[r], walkers[r].theta.data());
    walkers[r].llsum = llsum(walkers[r].theta.data());
    walkers[r].lprior = model.log_prior(walkers[r].theta.data());
  }

  std::vector<std::vector<double>> step(
      rungs, std::vector<double>(dim, config.initial_step));
  std::vector<std::vector<int>> batch_accepts(rungs,
                                              std::vector<int>(dim, 0));
  std::vector<std::vector<int>> batch_total(rungs, std::vector<int>(dim, 0));
  std::vector<long long> warmup_accepts(rungs, 0);
  long long target_accepts = 0;
  long long target_proposals = 0;

  std::vector<double> proposal(dim);
  int swap_parity = 0;

  const int total_sweeps = warmup + retained;
  for (int sweep = 0; sweep < total_sweeps; ++sweep) {
    const bool adapting = sweep < warmup;
    for (int r = 0; r < rungs; ++r) {
      Walker& w = walkers[r];
      const double beta_r = ladder[r];
      for (int j = 0; j < dim; ++j) {
        proposal = w.theta;
        double cand = w.theta[j] + step[r][j] * rngs[r].normal();
        proposal[j] = reflect_into(cand, model.lo[j], model.hi[j]);
        double ll_new = llsum(proposal.data());
        double lp_new = model.log_prior(proposal.data());
        double log_ratio = beta_r * (ll_new - w.llsum) + (lp_new - w.lprior);
        bool accepted = mh_accept(rngs[r], log_ratio);
        if (accepted) {
          w.theta[j] = proposal[j];
          w.llsum = ll_new;
          w.lprior = lp_new;
        }
        if (adapting) {
          if (accepted) {
            ++batch_accepts[r][j];
            ++warmup_accepts[r];
          }
          if (++batch_total[r][j] == 50) {
            double rate = batch_accepts[r][j] / 50.0;
            step[r][j] *= std::exp(rate - config.target_accept);
            double width = model.hi[j] - model.lo[j];
            step[r][j] = std::clamp(step[r][j], 1e-6 * width, width);
            batch_accepts[r][j] = 0;
            batch_total[r][j] = 0;
          }
        } else if (r == rungs - 1) {
          ++target_proposals;
          if (accepted) ++target_accepts;
        }
      }
    }

    if (sweep == warmup - 1) {
      for (int r = 0; r < rungs; ++r)
        if (warmup > 0 && warmup_accepts[r] == 0)
          throw std::runtime_error(
              "adaptation failure: chain " + std::to_string(stack) +
              " rung " + std::to_string(r) +
              " accepted no proposals during warmup");
    }

    if (rungs > 1 && (sweep + 1) % 10 == 0) {
      for (int r = swap_parity; r + 1 < rungs; r += 2) {
        double delta = (ladder[r + 1] - ladder[r]) *
                       (walkers[r].llsum - walkers[r + 1].llsum);
        if (mh_accept(swap_rng, delta)) std::swap(walkers[r], walkers[r + 1]);
      }
      swap_parity ^= 1;
    }

    if (!adapting) {
      int t = sweep - warmup;
      for (int r = 0; r < rungs; ++r) {
        double* dst =
            rung_draws[r].data() + static_cast<std::size_t>(t) * dim;
        std::copy(walkers[r].theta.begin(), walkers[r].theta.end(), dst);
      }
    }
  }

  accept_rate_out = target_proposals > 0
                        ? static_cast<double>(target_accepts) /
                              static_cast<double>(target_proposals)
                        : 0.0;
}

std::vector<ChainSet> run_all(const ModelSpec& model, const Dataset& data,
                              const McmcConfig& config) {
  validate(config);
  std::vector<double> ladder = resolve_ladder(config);
  const int rungs = static_cast<int>(ladder.size());
  const int retained = config.draws_per_chain;
  const int dim = model.dim;

  std::vector<ChainSet> out(rungs);
  for (int r = 0; r < rungs; ++r) {
    out[r].chains = config.chains;
    out[r].iters = retained;
    out[r].dim = dim;
    out[r].beta = ladder[r];
    out[r].seed = config.seed;
    out[r].draws.assign(
        static_cast<std::size_t>(config.chains) * retained * dim, 0.0);
    out[r].accept_rate.assign(config.chains, 0.0);
  }

  std::string failure;
  parallel_for(config.chains, [&](std::size_t stack) {
    std::vector<std::vector<double>> rung_draws(
        rungs,
        std::vector<double>(static_cast<std::size_t>(retained) * dim, 0.0));
    double acc = 0.0;
    try {
      run_stack(model, data, config, ladder, static_cast<int>(stack),
                rung_draws, acc);
    } catch (const std::exception& e) {
#pragma omp critical
      failure = e.what();
      return;
    }
    for (int r = 0; r < rungs; ++r) {
      double* dst = out[r].draws.data() +
                    stack * static_cast<std::size_t>(retained) * dim;
      std::copy(rung_draws[r].begin(), rung_draws[r].end(), dst);
      out[r].accept_rate[stack] = acc;
    }
  });
  if (!failure.empty()) throw std::runtime_error(failure);
  return out;
}

}  // namespace

ChainSet run_mcmc(const ModelSpec& model, const Dataset& data,
                  const McmcConfig& config) {
  std::vector<ChainSet> all = run_all(model, data, config);
  return std::move(all.back());
}

std::vector<ChainSet> run_mcmc_ladder(const ModelSpec& model,
                                      const Dataset& data,
                                      const McmcConfig& config) {
  return run_all(model, data, config);
}

std::pair<double, double> posterior_expectation(
    const ChainSet& chains, const std::function<double(const double*)>& f) {
  if (chains.total() == 0) throw std::invalid_argument("empty chain set");
  RunningMoments overall;
  std::vector<double> batch_means;
  int batch = std::max(
      1, static_cast<int>(std::floor(std::sqrt(double(chains.iters)))));
  for (int c = 0; c < chains.chains; ++c) {
    RunningMoments cur;
    for (int t = 0; t < chains.iters; ++t) {
      double v = f(chains.at(c, t));
      overall.add(v);
      cur.add(v);
      if (cur.count() == batch) {
        batch_means.push_back(cur.mean());
        cur = RunningMoments();
      }
    }
  }
  double mcse;
  if (batch_means.size() >= 2) {
    double bm_sd = sample_sd(batch_means);
    mcse = bm_sd / std::sqrt(static_cast<double>(batch_means.size()));
  } else {
    mcse = overall.count() >= 2
               ? std::sqrt(overall.variance() / overall.count())
               : 0.0;
  }
  return {overall.mean(), mcse};
}

namespace {

// Geyer initial-positive-sequence ESS for one scalar series.
double series_ess(const std::vector<double>& x) {
  std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  double mean = mean_of(x);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - mean;
  double c0 = 0.0;
  for (double v : d) c0 += v * v;
  c0 /= n;
  if (c0 <= 0.0) return static_cast<double>(n);
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += d[i] * d[i + lag];
    return s / n;
  };
  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 1; lag + 1 < n / 2; lag += 2) {
    double pair = (acov(lag) + acov(lag + 1)) / c0;
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // enforce monotone decreasing
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  return static_cast<double>(n) / tau;
}

}  // namespace

Diagnostics diagnostics(const ChainSet& cs) {
  if (cs.chains < 2 || cs.iters < 4)
    throw std::invalid_argument("diagnostics need >=2 chains and >=4 draws");
  Diagnostics d;
  d.rhat.resize(cs.dim);
  d.ess.resize(cs.dim);
  int half = cs.iters / 2;
  for (int j = 0; j < cs.dim; ++j) {
    // split-Rhat over 2*chains half-sequences
    std::vector<double> means, vars;
    for (int c = 0; c < cs.chains; ++c) {
      for (int part = 0; part < 2; ++part) {
        RunningMoments m;
        int begin = part * half;
        for (int t = begin; t < begin + half; ++t) m.add(cs.at(c, t)[j]);
        means.push_back(m.mean());
        vars.push_back(m.variance());
      }
    }
    double m_count = static_cast<double>(means.size());
    double grand = mean_of(means);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= half / (m_count - 1.0);
    double w = mean_of(vars);
    if (w <= 0.0) {
      d.rhat[j] = 1.0;
    } else {
      double var_plus = (half - 1.0) / half * w + b / half;
      d.rhat[j] = std::sqrt(var_plus / w);
    }
    double ess = 0.0;
    for (int c = 0; c < cs.chains; ++c) {
      std::vector<double> series(cs.iters);
      for (int t = 0; t < cs.iters; ++t) series[t] = cs.at(c, t)[j];
      ess += series_ess(series);
    }
    d.ess[j] = ess;
  }
  return d;
}

void write_chains_csv(const ChainSet& cs, const std::string& path) {
  std::string body = "chain,iter";
  for (int j = 1; j <= cs.dim; ++j) body += ",theta_" + std::to_string(j);
  body += "\n";
  for (int c = 0; c < cs.chains; ++c)
    for (int t = 0; t < cs.iters; ++t) {
      body += std::to_string(c) + "," + std::to_string(t);
      const double* row = cs.at(c, t);
      for (int j = 0; j < cs.dim; ++j) body += "," + format_double(row[j]);
      body += "\n";
    }
  write_text_file(path, body);
}

std::string diagnostics_json(const Diagnostics& d) {
  nlohmann::json j;
  j["rhat"] = d.rhat;
  j["ess"] = d.ess;
  return j.dump(2);
}

}  // namespace slt
