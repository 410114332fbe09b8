#include "slt/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "slt/io.hpp"
#include "slt/mathutil.hpp"

namespace slt {

namespace {

constexpr std::uint64_t kPriorTag = 0x7072696f72ULL;  // "prior"
constexpr std::uint64_t kMleTag = 0x6d6c65ULL;        // "mle"
constexpr std::uint64_t kTestTag = 0x74657374ULL;     // "test"

void check_inputs(const ChainSet& chains, const Dataset& data) {
  if (data.n <= 0) throw std::invalid_argument("empty data");
  if (chains.total() == 0) throw std::invalid_argument("empty chain set");
}

// acc[i][c] accumulates log-mean-exp of alpha * log p(x_i|theta) over the
// draws of chain c.  Shared by the cumulant, training loss and LOOCV so their
// identities hold bit-for-bit.
std::vector<std::vector<LogMeanExp>> accumulate_alpha(const ChainSet& chains,
                                                      const ModelSpec& model,
                                                      const Dataset& data,
                                                      double alpha) {
  std::vector<std::vector<LogMeanExp>> acc(
      data.n, std::vector<LogMeanExp>(chains.chains));
  for (int c = 0; c < chains.chains; ++c)
    for (int t = 0; t < chains.iters; ++t) {
      const double* theta = chains.at(c, t);
      for (int i = 0; i < data.n; ++i)
        acc[i][c].add(alpha * model.log_likelihood(data.row(i), theta));
    }
  return acc;
}

// (1/n) sum_i log E_theta[p_i^alpha], plus the per-chain values for a crude
// between-chain MCSE.
struct AlphaStats {
  double value = 0.0;
  double mcse = 0.0;
};

AlphaStats alpha_stats(const ChainSet& chains, const ModelSpec& model,
                       const Dataset& data, double alpha) {
  auto acc = accumulate_alpha(chains, model, data, alpha);
  double total = 0.0;
  std::vector<double> per_chain(chains.chains, 0.0);
  for (int i = 0; i < data.n; ++i) {
    LogMeanExp merged;
    for (int c = 0; c < chains.chains; ++c) {
      merged.merge(acc[i][c]);
      per_chain[c] += acc[i][c].value();
    }
    total += merged.value();
  }
  AlphaStats s;
  s.value = total / data.n;
  for (double& v : per_chain) v /= data.n;
  s.mcse = stderr_of_mean(per_chain);
  return s;
}

}  // namespace

double cumulant(const ChainSet& chains, const ModelSpec& model,
                const Dataset& data, double alpha) {
  check_inputs(chains, data);
  if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
  if (alpha == 0.0) return 0.0;
  return alpha_stats(chains, model, data, alpha).value;
}

LossStats cumulant_stats(const ChainSet& chains, const ModelSpec& model,
                         const Dataset& data, double alpha) {
  check_inputs(chains, data);
  if (alpha == 0.0) return {0.0, 0.0};
  AlphaStats s = alpha_stats(chains, model, data, alpha);
  return {s.value, s.mcse};
}

double training_loss(const ChainSet& chains, const ModelSpec& model,
                     const Dataset& data) {
  return -cumulant(chains, model, data, 1.0);
}

LoocvResult loocv(const ChainSet& chains, const ModelSpec& model,
                  const Dataset& data) {
  check_inputs(chains, data);
  auto a1 = accumulate_alpha(chains, model, data, -1.0);
  auto a2 = accumulate_alpha(chains, model, data, -2.0);
  double s_total = static_cast<double>(chains.total());
  LoocvResult r;
  r.min_ess = s_total;
  double total = 0.0;
  for (int i = 0; i < data.n; ++i) {
    LogMeanExp m1, m2;
    for (int c = 0; c < chains.chains; ++c) {
      m1.merge(a1[i][c]);
      m2.merge(a2[i][c]);
    }
    total += m1.value();
    double ess = std::exp(2.0 * m1.value() - m2.value()) * s_total;
    r.min_ess = std::min(r.min_ess, ess);
  }
  r.value = total / data.n;
  r.unstable = r.min_ess < 0.10 * s_total;
  return r;
}

WaicResult waic(const ChainSet& chains, const ModelSpec& model,
                const Dataset& data) {
  check_inputs(chains, data);
  std::vector<std::vector<RunningMoments>> acc(
      data.n, std::vector<RunningMoments>(chains.chains));
  for (int c = 0; c < chains.chains; ++c)
    for (int t = 0; t < chains.iters; ++t) {
      const double* theta = chains.at(c, t);
      for (int i = 0; i < data.n; ++i)
        acc[i][c].add(model.log_likelihood(data.row(i), theta));
    }
  double v_sum = 0.0;
  std::vector<double> per_chain(chains.chains, 0.0);
  for (int i = 0; i < data.n; ++i) {
    RunningMoments merged;
    for (int c = 0; c < chains.chains; ++c) {
      merged.merge(acc[i][c]);
      per_chain[c] += acc[i][c].variance();
    }
    v_sum += merged.variance();
  }
  for (double& v : per_chain) v /= data.n;
  WaicResult r;
  r.v_term = v_sum / data.n;
  r.v_mcse = stderr_of_mean(per_chain);
  r.w_n = training_loss(chains, model, data) + r.v_term;
  return r;
}

double estimate_nu(const ChainSet& chains, const ModelSpec& model,
                   const Dataset& data) {
  return 0.5 * data.n * waic(chains, model, data).v_term;
}

namespace {

double g_mc(const ChainSet& chains, const ModelSpec& model, int test_n,
            std::uint64_t seed, int draw_cap, double* se_out) {
  if (test_n <= 0) throw std::invalid_argument("test_n must be >= 1");
  if (chains.total() == 0) throw std::invalid_argument("empty chain set");
  int stride = 1;
  if (draw_cap > 0) {
    int per_chain_cap = std::max(1, draw_cap / std::max(1, chains.chains));
    stride = std::max(1, chains.iters / per_chain_cap);
  }
  std::vector<const double*> used;
  for (int c = 0; c < chains.chains; ++c)
    for (int t = 0; t < chains.iters; t += stride) used.push_back(chains.at(c, t));

  Dataset test = sample_true(model, test_n, seed);
  bool control = model.analytic_L0.has_value() &&
                 static_cast<int>(model.theta0.size()) == model.dim;
  RunningMoments acc;
  for (int j = 0; j < test_n; ++j) {
    LogMeanExp lme;
    for (const double* theta : used)
      lme.add(model.log_likelihood(test.row(j), theta));
    if (control)
      acc.add(model.log_likelihood(test.row(j), model.theta0.data()) -
              lme.value());
    else
      acc.add(-lme.value());
  }
  if (se_out)
    *se_out = std::sqrt(acc.variance() / static_cast<double>(test_n));
  return control ? *model.analytic_L0 + acc.mean() : acc.mean();
}

}  // namespace

double generalization_loss_mc(const ChainSet& chains, const ModelSpec& model,
                              int test_n, std::uint64_t seed, int draw_cap) {
  return g_mc(chains, model, test_n, seed, draw_cap, nullptr);
}

LossStats generalization_loss_stats(const ChainSet& chains,
                                    const ModelSpec& model, int test_n,
                                    std::uint64_t seed, int draw_cap) {
  if (model.name == "conjugate_normal")
    return {generalization_loss(chains, model, test_n, seed, draw_cap), 0.0};
  double se = 0.0;
  double v = g_mc(chains, model, test_n, seed, draw_cap, &se);
  return {v, se};
}

double generalization_loss(const ChainSet& chains, const ModelSpec& model,
                           int test_n, std::uint64_t seed, int draw_cap) {
  if (model.name == "conjugate_normal") {
    // Gaussian posterior: predictive is N(m, 1+v); cross-entropy against
    // q = N(0,1) in closed form, no test draws needed.
    if (chains.total() == 0) throw std::invalid_argument("empty chain set");
    if (test_n <= 0) throw std::invalid_argument("test_n must be >= 1");
    RunningMoments mom;
    for (int c = 0; c < chains.chains; ++c)
      for (int t = 0; t < chains.iters; ++t) mom.add(chains.at(c, t)[0]);
    double m = mom.mean(), pv = 1.0 + mom.variance();
    return 0.5 * (kLog2Pi + std::log(pv)) + (1.0 + m * m) / (2.0 * pv);
  }
  return g_mc(chains, model, test_n, seed, draw_cap, nullptr);
}

WbicResult wbic(const ModelSpec& model, const Dataset& data,
                const McmcConfig& config, double beta_override) {
  if (data.n < 3) throw std::invalid_argument("wbic needs n >= 3");
  McmcConfig cfg = config;
  cfg.ladder.clear();
  cfg.beta = beta_override > 0.0 ? beta_override
                                 : 1.0 / std::log(static_cast<double>(data.n));
  ChainSet chains = run_mcmc(model, data, cfg);
  auto llsum = make_loglik_sum(model, data);
  auto [mean, mcse] =
      posterior_expectation(chains, [&](const double* th) { return -llsum(th); });
  return {mean, mcse, cfg.beta};
}

std::vector<double> ti_default_ladder() {
  std::vector<double> ladder(16);
  for (int k = 0; k < 16; ++k)
    ladder[k] = std::pow(10.0, -3.0 * (1.0 - k / 15.0));
  ladder[15] = 1.0;
  return ladder;
}

TiResult free_energy_ti(const ModelSpec& model, const Dataset& data,
                        const std::vector<double>& ladder,
                        const McmcConfig& config) {
  if (data.n == 0) return {0.0, 0.0, {0.0}, {0.0}};
  if (ladder.size() < 8) throw std::invalid_argument("ladder needs >= 8 rungs");
  if (!(ladder.front() > 0.0))
    throw std::invalid_argument("ladder must start above 0");
  for (std::size_t k = 1; k < ladder.size(); ++k)
    if (!(ladder[k] > ladder[k - 1]))
      throw std::invalid_argument("non-monotone ladder");
  if (std::fabs(ladder.back() - 1.0) > 1e-12)
    throw std::invalid_argument("ladder must end at 1");

  McmcConfig cfg = config;
  cfg.beta = 1.0;
  cfg.ladder = ladder;
  std::vector<ChainSet> runs = run_mcmc_ladder(model, data, cfg);

  auto llsum = make_loglik_sum(model, data);
  auto nln = [&](const double* th) { return -llsum(th); };

  TiResult r;
  r.betas.push_back(0.0);
  std::vector<double> mcses;
  {
    // beta -> 0 endpoint: prior-only expectation of n L_n
    Rng rng(mix_seed(config.seed, kPriorTag));
    RunningMoments prior;
    std::vector<double> theta(model.dim);
    for (int s = 0; s < 8192; ++s) {
      model.sample_prior(rng, theta.data());
      prior.add(nln(theta.data()));
    }
    r.e_nln.push_back(prior.mean());
    mcses.push_back(std::sqrt(prior.variance() / prior.count()));
  }
  for (const ChainSet& cs : runs) {
    auto [mean, mcse] = posterior_expectation(cs, nln);
    r.betas.push_back(cs.beta);
    r.e_nln.push_back(mean);
    mcses.push_back(mcse);
  }

  double f = 0.0, var = 0.0;
  std::size_t m = r.betas.size();
  for (std::size_t k = 0; k + 1 < m; ++k)
    f += (r.betas[k + 1] - r.betas[k]) * (r.e_nln[k] + r.e_nln[k + 1]) / 2.0;
  for (std::size_t k = 0; k < m; ++k) {
    double left = k > 0 ? r.betas[k] - r.betas[k - 1] : 0.0;
    double right = k + 1 < m ? r.betas[k + 1] - r.betas[k] : 0.0;
    double w = (left + right) / 2.0;
    var += w * w * mcses[k] * mcses[k];
  }
  r.value = f;
  r.mcse = std::sqrt(var);
  return r;
}

namespace {

// Nelder-Mead with reflection/expansion/contraction/shrink; box handled by a
// quadratic penalty outside.
std::vector<double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, const std::vector<double>& lo,
    const std::vector<double>& hi, int max_iter) {
  int d = static_cast<int>(x0.size());
  std::vector<std::vector<double>> simplex(d + 1, x0);
  for (int j = 0; j < d; ++j) {
    double step = 0.05 * (hi[j] - lo[j]);
    simplex[j + 1][j] =
        std::min(hi[j], std::max(lo[j], simplex[j + 1][j] + step));
    if (simplex[j + 1][j] == simplex[0][j]) simplex[j + 1][j] -= step;
  }
  std::vector<double> fv(d + 1);
  for (int k = 0; k <= d; ++k) fv[k] = f(simplex[k]);

  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> order(d + 1);
    for (int k = 0; k <= d; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return fv[a] < fv[b]; });
    int best = order[0], worst = order[d], second = order[d - 1];
    if (std::fabs(fv[worst] - fv[best]) < 1e-13 * (1.0 + std::fabs(fv[best])))
      break;

    std::vector<double> centroid(d, 0.0);
    for (int k = 0; k <= d; ++k)
      if (k != worst)
        for (int j = 0; j < d; ++j) centroid[j] += simplex[k][j] / d;

    auto blend = [&](double coef) {
      std::vector<double> p(d);
      for (int j = 0; j < d; ++j)
        p[j] = centroid[j] + coef * (simplex[worst][j] - centroid[j]);
      return p;
    };
    std::vector<double> refl = blend(-1.0);
    double f_refl = f(refl);
    if (f_refl < fv[best]) {
      std::vector<double> exp_p = blend(-2.0);
      double f_exp = f(exp_p);
      if (f_exp < f_refl) {
        simplex[worst] = exp_p;
        fv[worst] = f_exp;
      } else {
        simplex[worst] = refl;
        fv[worst] = f_refl;
      }
    } else if (f_refl < fv[second]) {
      simplex[worst] = refl;
      fv[worst] = f_refl;
    } else {
      std::vector<double> contr = blend(f_refl < fv[worst] ? -0.5 : 0.5);
      double f_contr = f(contr);
      if (f_contr < std::min(f_refl, fv[worst])) {
        simplex[worst] = contr;
        fv[worst] = f_contr;
      } else {
        for (int k = 0; k <= d; ++k) {
          if (k == best) continue;
          for (int j = 0; j < d; ++j)
            simplex[k][j] = simplex[best][j] +
                            0.5 * (simplex[k][j] - simplex[best][j]);
          fv[k] = f(simplex[k]);
        }
      }
    }
  }
  int best = 0;
  for (int k = 1; k <= d; ++k)
    if (fv[k] < fv[best]) best = k;
  return simplex[best];
}

}  // namespace

MleFit mle_fit(const ModelSpec& model, const Dataset& data) {
  if (data.n < 1) throw std::invalid_argument("mle_fit needs n >= 1");
  auto llsum = make_loglik_sum(model, data);
  auto objective = [&](const std::vector<double>& th) {
    std::vector<double> clamped(th);
    double penalty = 0.0;
    for (int j = 0; j < model.dim; ++j) {
      double c = std::clamp(th[j], model.lo[j], model.hi[j]);
      penalty += 1e6 * (th[j] - c) * (th[j] - c);
      clamped[j] = c;
    }
    return -llsum(clamped.data()) + penalty;
  };

  Rng rng(mix_seed(data.seed, kMleTag));
  std::vector<std::vector<double>> starts;
  if (static_cast<int>(model.theta0.size()) == model.dim) {
    std::vector<double> s0 = model.theta0;
    for (int j = 0; j < model.dim; ++j)
      s0[j] = std::clamp(s0[j], model.lo[j], model.hi[j]);
    starts.push_back(s0);
  }
  std::vector<double> draw(model.dim);
  while (static_cast<int>(starts.size()) < 20) {
    model.sample_prior(rng, draw.data());
    starts.push_back(draw);
  }

  MleFit best;
  best.nln = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    std::vector<double> x =
        nelder_mead(objective, s, model.lo, model.hi, 600 * model.dim);
    for (int j = 0; j < model.dim; ++j)
      x[j] = std::clamp(x[j], model.lo[j], model.hi[j]);
    double v = -llsum(x.data());
    if (v < best.nln) {
      best.nln = v;
      best.theta = x;
    }
  }
  return best;
}

double sbic(const ModelSpec& model, const Dataset& data, double lambda_hat) {
  if (!(lambda_hat > 0.0))
    throw std::invalid_argument("lambda_hat must be > 0");
  MleFit fit = mle_fit(model, data);
  return fit.nln + lambda_hat * std::log(static_cast<double>(data.n));
}

CriteriaReport criteria_report(const ModelSpec& model, const Dataset& data,
                               const McmcConfig& config, int test_n) {
  CriteriaReport r;
  r.n = data.n;

  McmcConfig cfg = config;
  cfg.beta = 1.0;
  cfg.ladder.clear();
  ChainSet chains = run_mcmc(model, data, cfg);

  AlphaStats t = alpha_stats(chains, model, data, 1.0);
  r.t_n = -t.value;
  r.t_n_mcse = t.mcse;
  AlphaStats c = alpha_stats(chains, model, data, -1.0);
  r.c_n = c.value;
  r.c_n_mcse = c.mcse;
  r.loocv_unstable = loocv(chains, model, data).unstable;

  WaicResult w = waic(chains, model, data);
  r.w_n = w.w_n;
  r.w_n_mcse = t.mcse;  // dominated by the shared T_n term
  r.functional_variance = w.v_term;
  r.nu_hat = 0.5 * data.n * w.v_term;

  LossStats g = generalization_loss_stats(chains, model, test_n,
                                          mix_seed(config.seed, kTestTag));
  r.g_n = g.value;
  r.g_n_mcse = g.mcse;

  WbicResult wb = wbic(model, data, config);
  r.wbic = wb.value;
  r.wbic_mcse = wb.mcse;

  TiResult ti = free_energy_ti(model, data, ti_default_ladder(), config);
  r.f_ti = ti.value;
  r.f_ti_mcse = ti.mcse;

  if (model.known_lambda) r.sbic = sbic(model, data, *model.known_lambda);
  return r;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

std::string report_json(const CriteriaReport& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["T_n"] = r.t_n;
  j["T_n_mcse"] = r.t_n_mcse;
  j["C_n"] = r.c_n;
  j["C_n_mcse"] = r.c_n_mcse;
  j["W_n"] = r.w_n;
  j["W_n_mcse"] = r.w_n_mcse;
  j["G_n"] = opt_json(r.g_n);
  j["G_n_mcse"] = opt_json(r.g_n_mcse);
  j["WBIC"] = r.wbic;
  j["WBIC_mcse"] = r.wbic_mcse;
  j["F_TI"] = opt_json(r.f_ti);
  j["F_TI_mcse"] = opt_json(r.f_ti_mcse);
  j["sBIC"] = opt_json(r.sbic);
  j["nu_hat"] = r.nu_hat;
  j["functional_variance"] = r.functional_variance;
  j["loocv_unstable"] = r.loocv_unstable;
  return j.dump(2);
}

std::string report_csv_header() {
  return "n,T_n,T_n_mcse,C_n,C_n_mcse,W_n,W_n_mcse,G_n,G_n_mcse,WBIC,"
         "WBIC_mcse,F_TI,F_TI_mcse,sBIC,nu_hat,functional_variance,"
         "loocv_unstable";
}

std::string report_csv_row(const CriteriaReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  std::string row;
  row += std::to_string(r.n);
  row += "," + format_double(r.t_n) + "," + format_double(r.t_n_mcse);
  row += "," + format_double(r.c_n) + "," + format_double(r.c_n_mcse);
  row += "," + format_double(r.w_n) + "," + format_double(r.w_n_mcse);
  row += "," + opt(r.g_n) + "," + opt(r.g_n_mcse);
  row += "," + format_double(r.wbic) + "," + format_double(r.wbic_mcse);
  row += "," + opt(r.f_ti) + "," + opt(r.f_ti_mcse);
  row += "," + opt(r.sbic);
  row += "," + format_double(r.nu_hat) + "," +
         format_double(r.functional_variance);
  row += std::string(",") + (r.loocv_unstable ? "1" : "0");
  return row;
}

}  // namespace slt
