#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slt/rng.hpp"

namespace slt {

using ParameterPoint = std::vector<double>;

// Observations drawn from the data-generating density q, stored row-major
// (n rows of obs_dim reals) together with the provenance needed to
// regenerate them.
struct Dataset {
  std::string model;
  int n = 0;
  int obs_dim = 1;
  std::uint64_t seed = 0;
  std::vector<double> values;  // n * obs_dim

  const double* row(int i) const { return values.data() + static_cast<std::size_t>(i) * obs_dim; }
};

// A statistical model with its truth q, prior over a hard box, and whatever
// analytic structure it carries (true loss, K, known learning coefficient).
struct ModelSpec {
  std::string name;
  int dim = 0;      // parameter dimension
  int obs_dim = 1;  // observation dimension
  std::vector<double> lo, hi;  // prior/domain box, prior renormalized over it
  ParameterPoint theta0;       // canonical true parameter

  // log p(x | theta)
  std::function<double(const double* x, const double* theta)> log_likelihood;
  // log pi(theta), normalized over the box
  std::function<double(const double* theta)> log_prior;
  // one observation from q
  std::function<void(Rng&, double* x)> sample_obs;
  // one draw from the prior
  std::function<void(Rng&, double* theta)> sample_prior;

  // K(theta) = E_X[log q / p]; empty when no closed form is known
  std::function<double(const double* theta)> analytic_K;
  std::optional<double> analytic_L0;      // L(theta0)
  std::optional<double> known_lambda;     // learning coefficient
  std::optional<int> known_m;             // its multiplicity

  // Optional O(1)-per-evaluation factory for sum_i log p(x_i|theta) built
  // from sufficient statistics; the generic fallback is an O(n) loop.
  std::function<std::function<double(const double*)>(const Dataset&)>
      loglik_sum_factory;

  bool in_box(const double* theta) const {
    for (int j = 0; j < dim; ++j)
      if (theta[j] < lo[j] || theta[j] > hi[j]) return false;
    return true;
  }
};

// --- zoo -------------------------------------------------------------------

// p(x|theta) = N(x; theta, I_d), q = N(x; theta0, I_d), uniform prior on
// theta0 +- 4.  lambda = d/2, m = 1.
ModelSpec regular_gaussian(int d, const ParameterPoint& theta0_star);

// p(x|a,b) = N(x; ab, 1), q = N(x; 0, 1), uniform prior on [-2,2]^2.
// K = (ab)^2/2, lambda = 1/2, m = 2.
ModelSpec product_mean();

// Variant of product_mean with K scaled by c > 0 (unnormalized likelihood);
// comparison fixture for the learning-coefficient monotonicity tests.
ModelSpec product_mean_scaled(double c);

// p(x|w,b) = (1-w) N(x;0,1) + w N(x;b,1), q = N(x;0,1),
// uniform prior on [0,1] x [-3,3].  No known lambda.
ModelSpec gaussian_mixture2();

// p(x|theta) = N(x; theta, 1), prior N(0, sigma0^2) truncated to [-10,10],
// q = N(0,1).  Closed-form posterior/predictive/marginal oracle below.
ModelSpec conjugate_normal(double sigma0);

ModelSpec make_model(const std::string& name);  // lookup by zoo name

// --- dataset and losses ----------------------------------------------------

// Draws n observations from q.  Deterministic in (model, n, seed); the
// per-dataset stream is mix_seed(seed, 0x64617461).
Dataset sample_true(const ModelSpec& model, int n, std::uint64_t seed);

// L_n(theta) = -(1/n) sum_i log p(x_i | theta).  Empty dataset is an error.
double empirical_loss(const ModelSpec& model, const Dataset& data,
                      const double* theta);

// K_n(theta) = L_n(theta) - L_n(theta0)
double empirical_kn(const ModelSpec& model, const Dataset& data,
                    const double* theta);

// sum_i log p(x_i|theta) evaluator; uses the sufficient-statistic fast path
// when the model provides one.
std::function<double(const double*)> make_loglik_sum(const ModelSpec& model,
                                                     const Dataset& data);

// K(theta): analytic when available, otherwise quadrature over q (obs_dim 1).
double true_kl(const ModelSpec& model, const double* theta);

// --- conjugate closed forms --------------------------------------------------

// Exact quantities for conjugate_normal fitted to a dataset.  Domain
// truncation at +-10 contributes below double precision and is ignored.
struct ConjugateAnalytic {
  double sigma0 = 1.0;
  int n = 0;
  double sum_x = 0.0, sum_x2 = 0.0;
  std::vector<double> xs;

  double precision() const { return n + 1.0 / (sigma0 * sigma0); }
  double posterior_var() const { return 1.0 / precision(); }
  double posterior_mean() const { return sum_x / precision(); }

  double log_marginal() const;
  double free_energy() const { return -log_marginal(); }
  double predictive_logpdf(double x) const;
  double training_loss() const;          // T_n
  double generalization_loss() const;    // G_n under q = N(0,1)
  double loocv_refit() const;            // C_n by exact leave-one-out refits
  double waic() const;                   // variance-form W_n
  double free_energy_beta(double beta) const;
  double e_beta_nln(double beta) const;  // E_beta[n L_n]
};

ConjugateAnalytic conjugate_analytic(double sigma0, const Dataset& data);

}  // namespace slt
