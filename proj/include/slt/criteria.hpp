#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slt/model.hpp"
#include "slt/sampler.hpp"

namespace slt {

struct LoocvResult {
  double value = 0.0;
  bool unstable = false;
  double min_ess = 0.0;  // smallest importance-weight ESS over data points
};

struct LossStats {
  double value = 0.0;
  double mcse = 0.0;  // between-chain spread (test-set SE for G)
};

struct WaicResult {
  double w_n = 0.0;
  double v_term = 0.0;  // (1/n) sum_i Var_theta[log p(x_i|theta)]
  double v_mcse = 0.0;  // between-chain spread of v_term
};

struct WbicResult {
  double value = 0.0;
  double mcse = 0.0;
  double beta = 0.0;
};

struct TiResult {
  double value = 0.0;
  double mcse = 0.0;
  std::vector<double> betas;    // 0 endpoint first, then the ladder
  std::vector<double> e_nln;    // E_beta[n L_n] per entry of betas
};

struct MleFit {
  std::vector<double> theta;
  double nln = 0.0;  // n * L_n(theta_hat)
};

struct CriteriaReport {
  int n = 0;
  double t_n = 0.0, t_n_mcse = 0.0;
  double c_n = 0.0, c_n_mcse = 0.0;
  double w_n = 0.0, w_n_mcse = 0.0;
  std::optional<double> g_n, g_n_mcse;
  double wbic = 0.0, wbic_mcse = 0.0;
  std::optional<double> f_ti, f_ti_mcse;
  std::optional<double> sbic;
  double nu_hat = 0.0;
  double functional_variance = 0.0;
  bool loocv_unstable = false;
};

// T_n = -(1/n) sum_i log E_theta[p(x_i|theta)].
double training_loss(const ChainSet& chains, const ModelSpec& model,
                     const Dataset& data);

// C_n = (1/n) sum_i log E_theta[1/p(x_i|theta)], flagged unstable when any
// importance-weight ESS drops below 10% of the retained draws.
LoocvResult loocv(const ChainSet& chains, const ModelSpec& model,
                  const Dataset& data);

WaicResult waic(const ChainSet& chains, const ModelSpec& model,
                const Dataset& data);

// nu_hat = (n/2) * (WAIC variance term).
double estimate_nu(const ChainSet& chains, const ModelSpec& model,
                   const Dataset& data);

// T(alpha) = (1/n) sum_i log E_theta[p(x_i|theta)^alpha].
// T(0)=0, -T(1)=training_loss, T(-1)=loocv hold on the same draws.
double cumulant(const ChainSet& chains, const ModelSpec& model,
                const Dataset& data, double alpha);

// cumulant value plus a between-chain MCSE (same accumulation path).
LossStats cumulant_stats(const ChainSet& chains, const ModelSpec& model,
                         const Dataset& data, double alpha);

// Monte-Carlo G_n over test_n fresh draws from the true distribution.
// ConjugateNormal instead evaluates the Gaussian predictive cross-entropy in
// closed form.  When the model knows L(theta0), the generic path uses
// log p(x|theta0) as a control variate with exactly known mean, which removes
// almost all test-set noise.  draw_cap thins the retained draws used for the
// predictive density (0 = use all).
double generalization_loss(const ChainSet& chains, const ModelSpec& model,
                           int test_n, std::uint64_t seed, int draw_cap = 1000);

// Plain generic Monte-Carlo path regardless of model name (for tests).
double generalization_loss_mc(const ChainSet& chains, const ModelSpec& model,
                              int test_n, std::uint64_t seed,
                              int draw_cap = 1000);

// generalization_loss plus its test-set Monte Carlo SE (0 for the
// ConjugateNormal closed form).
LossStats generalization_loss_stats(const ChainSet& chains,
                                    const ModelSpec& model, int test_n,
                                    std::uint64_t seed, int draw_cap = 1000);

// E_beta[n L_n] at beta = 1/log n (or an explicit override).
WbicResult wbic(const ModelSpec& model, const Dataset& data,
                const McmcConfig& config, double beta_override = -1.0);

// 16 geometric rungs from 1e-3 to 1.
std::vector<double> ti_default_ladder();

// F_n = integral_0^1 E_beta[n L_n] d beta by trapezoid over the ladder with a
// prior-sample beta=0 endpoint.  n=0 returns exactly 0.
TiResult free_energy_ti(const ModelSpec& model, const Dataset& data,
                        const std::vector<double>& ladder,
                        const McmcConfig& config);

// Best of 20 Nelder-Mead starts minimizing n L_n inside the domain box.
MleFit mle_fit(const ModelSpec& model, const Dataset& data);

// n L_n(theta_hat) + lambda_hat log n.
double sbic(const ModelSpec& model, const Dataset& data, double lambda_hat);

// Full report: beta=1 chains for T/C/W/G, WBIC chains, TI ladder, sBIC when
// the model declares its lambda.
CriteriaReport criteria_report(const ModelSpec& model, const Dataset& data,
                               const McmcConfig& config, int test_n = 100000);

std::string report_json(const CriteriaReport& r);
std::string report_csv_header();
std::string report_csv_row(const CriteriaReport& r);

}  // namespace slt
