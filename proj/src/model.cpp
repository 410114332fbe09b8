#include "slt/model.hpp"

#include <cmath>
#include <stdexcept>

#include "slt/mathutil.hpp"
#include "slt/quadrature.hpp"

namespace slt {

namespace {

double box_log_volume(const std::vector<double>& lo, const std::vector<double>& hi) {
  double v = 0.0;
  for (std::size_t j = 0; j < lo.size(); ++j) v += std::log(hi[j] - lo[j]);
  return v;
}

}  // namespace

ModelSpec regular_gaussian(int d, const ParameterPoint& theta0_star) {
  if (d < 1 || d > 3) throw std::invalid_argument("regular_gaussian: d must be 1..3");
  if (static_cast<int>(theta0_star.size()) != d)
    throw std::invalid_argument("regular_gaussian: theta0 size mismatch");
  ModelSpec m;
  m.name = "regular_gaussian_" + std::to_string(d);
  m.dim = d;
  m.obs_dim = d;
  m.theta0 = theta0_star;
  for (int j = 0; j < d; ++j) {
    m.lo.push_back(theta0_star[j] - 4.0);
    m.hi.push_back(theta0_star[j] + 4.0);
  }
  double neg_log_vol = -box_log_volume(m.lo, m.hi);
  m.log_likelihood = [d](const double* x, const double* th) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double r = x[j] - th[j];
      s += r * r;
    }
    return -0.5 * (d * kLog2Pi + s);
  };
  m.log_prior = [neg_log_vol](const double*) { return neg_log_vol; };
  ParameterPoint t0 = theta0_star;
  m.sample_obs = [d, t0](Rng& rng, double* x) {
    for (int j = 0; j < d; ++j) x[j] = t0[j] + rng.normal();
  };
  std::vector<double> lo = m.lo, hi = m.hi;
  m.sample_prior = [d, lo, hi](Rng& rng, double* th) {
    for (int j = 0; j < d; ++j) th[j] = rng.uniform(lo[j], hi[j]);
  };
  m.analytic_K = [d, t0](const double* th) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double r = th[j] - t0[j];
      s += r * r;
    }
    return 0.5 * s;
  };
  m.analytic_L0 = 0.5 * d * (kLog2Pi + 1.0);
  m.known_lambda = 0.5 * d;
  m.known_m = 1;
  // sum_i log p(x_i|th) = -n d/2 log2pi - (Q - 2 th.S + n|th|^2)/2
  m.loglik_sum_factory = [d](const Dataset& data) {
    std::vector<double> S(d, 0.0);
    double Q = 0.0;
    for (int i = 0; i < data.n; ++i) {
      const double* x = data.row(i);
      for (int j = 0; j < d; ++j) {
        S[j] += x[j];
        Q += x[j] * x[j];
      }
    }
    int n = data.n;
    return [d, n, S, Q](const double* th) {
      double dot = 0.0, nn = 0.0;
      for (int j = 0; j < d; ++j) {
        dot += th[j] * S[j];
        nn += th[j] * th[j];
      }
      return -0.5 * n * d * kLog2Pi - 0.5 * (Q - 2.0 * dot + n * nn);
    };
  };
  return m;
}

ModelSpec product_mean() {
  ModelSpec m;
  m.name = "product_mean";
  m.dim = 2;
  m.obs_dim = 1;
  m.lo = {-2.0, -2.0};
  m.hi = {2.0, 2.0};
  m.theta0 = {0.0, 0.0};
  m.log_likelihood = [](const double* x, const double* th) {
    double mu = th[0] * th[1];
    double r = x[0] - mu;
    return -0.5 * (kLog2Pi + r * r);
  };
  m.log_prior = [](const double*) { return -std::log(16.0); };
  m.sample_obs = [](Rng& rng, double* x) { x[0] = rng.normal(); };
  m.sample_prior = [](Rng& rng, double* th) {
    th[0] = rng.uniform(-2.0, 2.0);
    th[1] = rng.uniform(-2.0, 2.0);
  };
  m.analytic_K = [](const double* th) {
    double s = th[0] * th[1];
    return 0.5 * s * s;
  };
  m.analytic_L0 = 0.5 * (kLog2Pi + 1.0);
  m.known_lambda = 0.5;
  m.known_m = 2;
  m.loglik_sum_factory = [](const Dataset& data) {
    double S = 0.0, Q = 0.0;
    for (int i = 0; i < data.n; ++i) {
      S += data.values[i];
      Q += data.values[i] * data.values[i];
    }
    int n = data.n;
    return [S, Q, n](const double* th) {
      double mu = th[0] * th[1];
      return -0.5 * n * kLog2Pi - 0.5 * (Q - 2.0 * mu * S + n * mu * mu);
    };
  };
  return m;
}

ModelSpec product_mean_scaled(double c) {
  if (c <= 0.0) throw std::invalid_argument("product_mean_scaled: c must be > 0");
  ModelSpec m = product_mean();
  m.name = "product_mean_scaled";
  // log p_c(x|th) = log q(x) - c*f(x,th); the density is unnormalized for
  // c != 1 but K is exactly c*(ab)^2/2, which is all the learning-
  // coefficient estimators use.
  m.log_likelihood = [c](const double* x, const double* th) {
    double mu = th[0] * th[1];
    double f = 0.5 * mu * mu - x[0] * mu;
    return -0.5 * (kLog2Pi + x[0] * x[0]) - c * f;
  };
  m.analytic_K = [c](const double* th) {
    double s = th[0] * th[1];
    return c * 0.5 * s * s;
  };
  m.loglik_sum_factory = [c](const Dataset& data) {
    double S = 0.0, Q = 0.0;
    for (int i = 0; i < data.n; ++i) {
      S += data.values[i];
      Q += data.values[i] * data.values[i];
    }
    int n = data.n;
    return [c, S, Q, n](const double* th) {
      double mu = th[0] * th[1];
      double f_sum = n * 0.5 * mu * mu - S * mu;
      return -0.5 * n * kLog2Pi - 0.5 * Q - c * f_sum;
    };
  };
  return m;
}

ModelSpec gaussian_mixture2() {
  ModelSpec m;
  m.name = "gaussian_mixture2";
  m.dim = 2;
  m.obs_dim = 1;
  m.lo = {0.0, -3.0};
  m.hi = {1.0, 3.0};
  m.theta0 = {0.0, 0.0};
  m.log_likelihood = [](const double* x, const double* th) {
    double w = th[0], b = th[1];
    double l0 = -0.5 * (kLog2Pi + x[0] * x[0]);
    double r = x[0] - b;
    double l1 = -0.5 * (kLog2Pi + r * r);
    double hi = l0 > l1 ? l0 : l1;
    return hi + std::log((1.0 - w) * std::exp(l0 - hi) + w * std::exp(l1 - hi));
  };
  m.log_prior = [](const double*) { return -std::log(6.0); };
  m.sample_obs = [](Rng& rng, double* x) { x[0] = rng.normal(); };
  m.sample_prior = [](Rng& rng, double* th) {
    th[0] = rng.uniform(0.0, 1.0);
    th[1] = rng.uniform(-3.0, 3.0);
  };
  m.analytic_L0 = 0.5 * (kLog2Pi + 1.0);
  return m;
}

ModelSpec conjugate_normal(double sigma0) {
  if (sigma0 <= 0.0) throw std::invalid_argument("conjugate_normal: sigma0 must be > 0");
  ModelSpec m;
  m.name = "conjugate_normal";
  m.dim = 1;
  m.obs_dim = 1;
  m.lo = {-10.0};
  m.hi = {10.0};
  m.theta0 = {0.0};
  m.log_likelihood = [](const double* x, const double* th) {
    double r = x[0] - th[0];
    return -0.5 * (kLog2Pi + r * r);
  };
  double z = normal_cdf(10.0 / sigma0) - normal_cdf(-10.0 / sigma0);
  double log_trunc = std::log(z);
  m.log_prior = [sigma0, log_trunc](const double* th) {
    return normal_logpdf(th[0], 0.0, sigma0 * sigma0) - log_trunc;
  };
  m.sample_obs = [](Rng& rng, double* x) { x[0] = rng.normal(); };
  m.sample_prior = [sigma0](Rng& rng, double* th) {
    do {
      th[0] = sigma0 * rng.normal();
    } while (th[0] < -10.0 || th[0] > 10.0);
  };
  m.analytic_K = [](const double* th) { return 0.5 * th[0] * th[0]; };
  m.analytic_L0 = 0.5 * (kLog2Pi + 1.0);
  m.known_lambda = 0.5;
  m.known_m = 1;
  m.loglik_sum_factory = [](const Dataset& data) {
    double S = 0.0, Q = 0.0;
    for (int i = 0; i < data.n; ++i) {
      S += data.values[i];
      Q += data.values[i] * data.values[i];
    }
    int n = data.n;
    return [S, Q, n](const double* th) {
      double t = th[0];
      return -0.5 * n * kLog2Pi - 0.5 * (Q - 2.0 * t * S + n * t * t);
    };
  };
  return m;
}

ModelSpec make_model(const std::string& name) {
  if (name == "product_mean") return product_mean();
  if (name == "product_mean_scaled") return product_mean_scaled(2.0);
  if (name == "gaussian_mixture2") return gaussian_mixture2();
  if (name == "conjugate_normal") return conjugate_normal(1.0);
  if (name == "regular_gaussian_1") return regular_gaussian(1, {0.0});
  if (name == "regular_gaussian_2") return regular_gaussian(2, {0.0, 0.0});
  throw std::invalid_argument("unknown model: " + name);
}

Dataset sample_true(const ModelSpec& model, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("sample_true: n must be >= 0");
  Dataset d;
  d.model = model.name;
  d.n = n;
  d.obs_dim = model.obs_dim;
  d.seed = seed;
  d.values.resize(static_cast<std::size_t>(n) * model.obs_dim);
  Rng rng(mix_seed(seed, 0x64617461ULL));
  for (int i = 0; i < n; ++i) model.sample_obs(rng, d.values.data() + static_cast<std::size_t>(i) * model.obs_dim);
  return d;
}

double empirical_loss(const ModelSpec& model, const Dataset& data, const double* theta) {
  if (data.n == 0) throw std::invalid_argument("undefined empirical loss");
  double s = 0.0;
  for (int i = 0; i < data.n; ++i) s += model.log_likelihood(data.row(i), theta);
  return -s / data.n;
}

double empirical_kn(const ModelSpec& model, const Dataset& data, const double* theta) {
  return empirical_loss(model, data, theta) -
         empirical_loss(model, data, model.theta0.data());
}

std::function<double(const double*)> make_loglik_sum(const ModelSpec& model,
                                                     const Dataset& data) {
  if (model.loglik_sum_factory) return model.loglik_sum_factory(data);
  const ModelSpec* m = &model;
  const Dataset* d = &data;
  return [m, d](const double* th) {
    double s = 0.0;
    for (int i = 0; i < d->n; ++i) s += m->log_likelihood(d->row(i), th);
    return s;
  };
}

double true_kl(const ModelSpec& model, const double* theta) {
  if (model.analytic_K) return model.analytic_K(theta);
  if (model.obs_dim != 1)
    throw std::runtime_error("true_kl: no analytic K and obs_dim > 1");
  // E_q[log q - log p] with q = N(0,1) for the scalar zoo models
  return integrate_gl(
      [&](double x) {
        double lq = -0.5 * (kLog2Pi + x * x);
        double lp = model.log_likelihood(&x, theta);
        return std::exp(lq) * (lq - lp);
      },
      -9.0, 9.0, 36, 16);
}

// --- conjugate closed forms --------------------------------------------------

ConjugateAnalytic conjugate_analytic(double sigma0, const Dataset& data) {
  ConjugateAnalytic c;
  c.sigma0 = sigma0;
  c.n = data.n;
  c.xs.assign(data.values.begin(), data.values.end());
  for (double x : c.xs) {
    c.sum_x += x;
    c.sum_x2 += x * x;
  }
  return c;
}

double ConjugateAnalytic::log_marginal() const {
  double A = precision();
  return -0.5 * n * kLog2Pi - 0.5 * std::log(sigma0 * sigma0 * A) -
         0.5 * sum_x2 + sum_x * sum_x / (2.0 * A);
}

double ConjugateAnalytic::predictive_logpdf(double x) const {
  return normal_logpdf(x, posterior_mean(), 1.0 + posterior_var());
}

double ConjugateAnalytic::training_loss() const {
  double mu = posterior_mean(), s2 = 1.0 + posterior_var();
  double ss = sum_x2 - 2.0 * mu * sum_x + n * mu * mu;
  return 0.5 * (kLog2Pi + std::log(s2)) + ss / (2.0 * n * s2);
}

double ConjugateAnalytic::generalization_loss() const {
  double mu = posterior_mean(), s2 = 1.0 + posterior_var();
  return 0.5 * (kLog2Pi + std::log(s2)) + (1.0 + mu * mu) / (2.0 * s2);
}

double ConjugateAnalytic::loocv_refit() const {
  double acc = 0.0;
  for (double x : xs) {
    double A = (n - 1) + 1.0 / (sigma0 * sigma0);
    double mu = (sum_x - x) / A;
    acc += normal_logpdf(x, mu, 1.0 + 1.0 / A);
  }
  return -acc / n;
}

double ConjugateAnalytic::waic() const {
  double mu = posterior_mean(), t2 = posterior_var();
  double ss = sum_x2 - 2.0 * mu * sum_x + n * mu * mu;
  double v = (ss / n) * t2 + 0.5 * t2 * t2;
  return training_loss() + v;
}

double ConjugateAnalytic::free_energy_beta(double beta) const {
  double A = beta * n + 1.0 / (sigma0 * sigma0);
  return 0.5 * beta * n * kLog2Pi + 0.5 * std::log(sigma0 * sigma0 * A) +
         0.5 * beta * sum_x2 - beta * beta * sum_x * sum_x / (2.0 * A);
}

double ConjugateAnalytic::e_beta_nln(double beta) const {
  double A = beta * n + 1.0 / (sigma0 * sigma0);
  double mu = beta * sum_x / A, t2 = 1.0 / A;
  return 0.5 * n * kLog2Pi +
         0.5 * (sum_x2 - 2.0 * mu * sum_x + n * (mu * mu + t2));
}

}  // namespace slt
