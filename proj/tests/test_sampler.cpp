#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "slt/mathutil.hpp"
#include "slt/model.hpp"
#include "slt/parallel.hpp"
#include "slt/quadrature.hpp"
#include "slt/sampler.hpp"

using namespace slt;

namespace {

McmcConfig quick_config(std::uint64_t seed, int draws = 2000, int chains = 4) {
  McmcConfig c;
  c.chains = chains;
  c.draws_per_chain = draws;
  c.seed = seed;
  return c;
}

ChainSet point_mass(const std::vector<double>& theta, int chains, int iters) {
  ChainSet cs;
  cs.chains = chains;
  cs.iters = iters;
  cs.dim = (int)theta.size();
  cs.draws.reserve((std::size_t)chains * iters * theta.size());
  for (int c = 0; c < chains; ++c)
    for (int t = 0; t < iters; ++t)
      for (double v : theta) cs.draws.push_back(v);
  cs.accept_rate.assign(chains, 1.0);
  return cs;
}

}  // namespace

TEST_CASE("reflect_into folds proposals back into the box") {
  CHECK(reflect_into(0.4, 0.0, 1.0) == doctest::Approx(0.4));
  CHECK(reflect_into(1.2, 0.0, 1.0) == doctest::Approx(0.8));
  CHECK(reflect_into(-0.3, 0.0, 1.0) == doctest::Approx(0.3));
  CHECK(reflect_into(2.5, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(reflect_into(-7.7, -2.0, 2.0) == doctest::Approx(0.3));
  for (double x : {-123.4, 55.1, 0.123, 3.99}) {
    double y = reflect_into(x, -1.5, 2.5);
    CHECK(y >= -1.5);
    CHECK(y <= 2.5);
  }
}

TEST_CASE("metropolis rule satisfies detailed balance on a 3-point target") {
  // Uniform proposal over the other two states; 10^6 steps; empirical
  // occupancy within 3 sigma of the stationary law.
  const std::array<double, 3> p = {0.2, 0.3, 0.5};
  Rng rng(2024);
  int state = 0;
  std::array<long, 3> counts = {0, 0, 0};
  const long steps = 1000000;
  for (long s = 0; s < steps; ++s) {
    int prop = (state + 1 + (int)rng.below(2)) % 3;
    if (mh_accept(rng, std::log(p[prop] / p[state]))) state = prop;
    ++counts[state];
  }
  for (int k = 0; k < 3; ++k) {
    double freq = (double)counts[k] / steps;
    // correlated chain: inflate the binomial sigma by a mixing factor
    double sigma = 3.0 * std::sqrt(p[k] * (1.0 - p[k]) / steps);
    CHECK(std::abs(freq - p[k]) < 3.0 * sigma);
  }
}

TEST_CASE("same seed gives identical draws; jobs setting does not matter") {
  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 60, 8);
  McmcConfig cfg = quick_config(5, 500);
  ChainSet a = run_mcmc(pm, data, cfg);
  ChainSet b = run_mcmc(pm, data, cfg);
  CHECK(a.draws == b.draws);
  CHECK(a.accept_rate == b.accept_rate);

  set_jobs(3);
  ChainSet c = run_mcmc(pm, data, cfg);
  set_jobs(1);
  CHECK(a.draws == c.draws);

  McmcConfig cfg2 = cfg;
  cfg2.seed = 6;
  ChainSet d = run_mcmc(pm, data, cfg2);
  CHECK(a.draws != d.draws);
}

TEST_CASE("draws stay inside the domain box and counts line up") {
  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 30, 3);
  McmcConfig cfg = quick_config(9, 400, 3);
  ChainSet cs = run_mcmc(pm, data, cfg);
  CHECK(cs.chains == 3);
  CHECK(cs.iters == 400);
  CHECK(cs.total() == 1200);
  for (int c = 0; c < cs.chains; ++c)
    for (int t = 0; t < cs.iters; ++t) CHECK(pm.in_box(cs.at(c, t)));
}

TEST_CASE("conjugate posterior moments match the closed form") {
  ModelSpec cj = conjugate_normal(1.0);
  Dataset data = sample_true(cj, 50, 12);
  ConjugateAnalytic an = conjugate_analytic(1.0, data);
  ChainSet cs = run_mcmc(cj, data, quick_config(31, 6000));
  auto [mean, mcse] = posterior_expectation(cs, [](const double* t) { return t[0]; });
  CHECK(std::abs(mean - an.posterior_mean()) < 4.0 * mcse);
  auto [m2, mcse2] =
      posterior_expectation(cs, [&](const double* t) { return (t[0] - mean) * (t[0] - mean); });
  (void)mcse2;
  CHECK(m2 == doctest::Approx(an.posterior_var()).epsilon(0.10));
}

TEST_CASE("tempered target has the tempered conjugate variance") {
  // At inverse temperature beta the conjugate posterior is
  // N(beta sum x /(beta n + 1/sigma0^2), 1/(beta n + 1/sigma0^2)).
  ModelSpec cj = conjugate_normal(1.0);
  Dataset data = sample_true(cj, 40, 4);
  double sum = 0.0;
  for (double v : data.values) sum += v;
  McmcConfig cfg = quick_config(77, 6000);
  cfg.beta = 0.5;
  cfg.ladder = {0.5};  // single rung: plain tempered RWM
  ChainSet cs = run_mcmc(cj, data, cfg);
  double prec = 0.5 * 40 + 1.0;
  auto [mean, mcse] = posterior_expectation(cs, [](const double* t) { return t[0]; });
  CHECK(std::abs(mean - 0.5 * sum / prec) < 4.0 * mcse);
  auto [m2, unused] = posterior_expectation(
      cs, [&](const double* t) { return (t[0] - mean) * (t[0] - mean); });
  (void)unused;
  CHECK(m2 == doctest::Approx(1.0 / prec).epsilon(0.10));
}

TEST_CASE("product_mean posterior concentrates near the hyperbola") {
  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 200, 6);
  ChainSet cs = run_mcmc(pm, data, quick_config(15, 4000));
  auto [kmean, mcse] =
      posterior_expectation(cs, [&](const double* t) { return pm.analytic_K(t); });
  (void)mcse;
  CHECK(kmean < 10.0 / 200.0);
  CHECK(kmean > 0.0);
}

TEST_CASE("grid-quadrature oracle equivalence for 1-d models") {
  for (const char* name : {"regular_gaussian_1", "conjugate_normal"}) {
    ModelSpec m = make_model(name);
    Dataset data = sample_true(m, 150, 19);
    oracle::GridPosterior1D grid(m, data);
    ChainSet cs = run_mcmc(m, data, quick_config(23, 6000));
    auto [mean, mcse] = posterior_expectation(cs, [](const double* t) { return t[0]; });
    CHECK_MESSAGE(std::abs(mean - grid.mean()) < 4.0 * mcse, name);
    auto [kmean, kmcse] =
        posterior_expectation(cs, [&](const double* t) { return m.analytic_K(t); });
    double kgrid = grid.expect([&](double th) { return m.analytic_K(&th); });
    CHECK_MESSAGE(std::abs(kmean - kgrid) < 4.0 * kmcse + 1e-9, name);
  }
}

TEST_CASE("grid-quadrature oracle equivalence for 2-d models") {
  // Dense tensor-grid posterior for d=2 via integrate_box weights.
  for (const char* name : {"regular_gaussian_2", "product_mean"}) {
    ModelSpec m = make_model(name);
    Dataset data = sample_true(m, 120, 29);
    auto llsum = make_loglik_sum(m, data);
    // normalizing shift for stability
    double shift = llsum(m.theta0.data());
    auto weight = [&](const double* th) {
      return std::exp(m.log_prior(th) + llsum(th) - shift);
    };
    double z = integrate_box(weight, m.lo, m.hi, 160, 8);
    auto post_mean = [&](const std::function<double(const double*)>& f) {
      return integrate_box(
                 [&](const double* th) { return weight(th) * f(th); }, m.lo,
                 m.hi, 160, 8) /
             z;
    };
    double g0 = post_mean([](const double* t) { return t[0]; });
    double g1 = post_mean([](const double* t) { return t[1]; });
    double gk = post_mean([&](const double* t) { return m.analytic_K(t); });

    ChainSet cs = run_mcmc(m, data, quick_config(37, 8000));
    auto [m0, s0] = posterior_expectation(cs, [](const double* t) { return t[0]; });
    auto [m1, s1] = posterior_expectation(cs, [](const double* t) { return t[1]; });
    auto [mk, sk] =
        posterior_expectation(cs, [&](const double* t) { return m.analytic_K(t); });
    CHECK_MESSAGE(std::abs(m0 - g0) < 4.0 * s0 + 1e-9, name, " coord 0");
    CHECK_MESSAGE(std::abs(m1 - g1) < 4.0 * s1 + 1e-9, name, " coord 1");
    CHECK_MESSAGE(std::abs(mk - gk) < 4.0 * sk + 1e-9, name, " K mean");
  }
}

TEST_CASE("exchange ladder preserves the beta=1 marginal") {
  ModelSpec cj = conjugate_normal(1.0);
  Dataset data = sample_true(cj, 50, 41);
  ConjugateAnalytic an = conjugate_analytic(1.0, data);
  McmcConfig cfg = quick_config(51, 6000);
  cfg.ladder = {0.25, 0.5, 1.0};
  ChainSet cs = run_mcmc(cj, data, cfg);
  CHECK(cs.beta == doctest::Approx(1.0));
  auto [mean, mcse] = posterior_expectation(cs, [](const double* t) { return t[0]; });
  CHECK(std::abs(mean - an.posterior_mean()) < 4.0 * mcse);
}

TEST_CASE("run_mcmc_ladder returns one chain set per rung in ladder order") {
  ModelSpec cj = conjugate_normal(1.0);
  Dataset data = sample_true(cj, 20, 43);
  McmcConfig cfg = quick_config(53, 600);
  cfg.beta = 1.0;
  cfg.ladder = {0.1, 0.4, 1.0};
  std::vector<ChainSet> rungs = run_mcmc_ladder(cj, data, cfg);
  REQUIRE(rungs.size() == 3);
  CHECK(rungs[0].beta == doctest::Approx(0.1));
  CHECK(rungs[1].beta == doctest::Approx(0.4));
  CHECK(rungs[2].beta == doctest::Approx(1.0));
  // colder rungs spread wider: posterior variance shrinks with beta
  auto var_of = [](const ChainSet& cs) {
    RunningMoments m;
    for (int c = 0; c < cs.chains; ++c)
      for (int t = 0; t < cs.iters; ++t) m.add(cs.at(c, t)[0]);
    return m.variance();
  };
  CHECK(var_of(rungs[0]) > var_of(rungs[2]));
}

TEST_CASE("posterior_expectation basics") {
  ChainSet pt = point_mass({0.3, -1.1}, 3, 50);
  auto [one, zero] = posterior_expectation(pt, [](const double*) { return 1.0; });
  CHECK(one == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(zero == doctest::Approx(0.0).epsilon(1e-12));

  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 5, 3);
  double direct = pm.log_likelihood(data.row(0), pt.at(0, 0));
  auto [lp, lpse] = posterior_expectation(
      pt, [&](const double* t) { return pm.log_likelihood(data.row(0), t); });
  (void)lpse;
  CHECK(lp == doctest::Approx(direct).epsilon(1e-15));

  ChainSet empty;
  CHECK_THROWS(posterior_expectation(empty, [](const double*) { return 1.0; }));
}

TEST_CASE("diagnostics: iid chains are clean, separated chains are flagged") {
  Rng rng(61);
  ChainSet iid;
  iid.chains = 4;
  iid.iters = 2000;
  iid.dim = 1;
  for (int c = 0; c < 4; ++c)
    for (int t = 0; t < 2000; ++t) iid.draws.push_back(rng.normal());
  iid.accept_rate.assign(4, 0.3);
  Diagnostics d = diagnostics(iid);
  REQUIRE(d.rhat.size() == 1);
  CHECK(d.rhat[0] > 0.99);
  CHECK(d.rhat[0] < 1.02);
  CHECK(d.ess[0] <= iid.total());
  CHECK(d.ess[0] > 0.5 * iid.total());

  ChainSet split = iid;
  for (int t = 0; t < 2000; ++t) split.draws[t] += 8.0;  // chain 0 off in its own mode
  Diagnostics ds = diagnostics(split);
  CHECK(ds.rhat[0] > 1.1);
}

TEST_CASE("config validation and adaptation failure") {
  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 10, 1);

  McmcConfig bad = quick_config(1);
  bad.chains = 1;
  CHECK_THROWS_AS(run_mcmc(pm, data, bad), std::invalid_argument);

  bad = quick_config(1);
  bad.target_accept = 0.0;
  CHECK_THROWS_AS(run_mcmc(pm, data, bad), std::invalid_argument);

  bad = quick_config(1);
  bad.ladder = {0.5, 0.25, 1.0};  // not increasing
  CHECK_THROWS_AS(run_mcmc(pm, data, bad), std::invalid_argument);

  bad = quick_config(1);
  bad.ladder = {0.25, 0.5};  // does not end at beta
  CHECK_THROWS_AS(run_mcmc(pm, data, bad), std::invalid_argument);

  // Degenerate target: chains start at the needle tip, every move drops the
  // log likelihood by ~1e12 and the short warmup cannot shrink the step far
  // enough for any acceptance.
  ModelSpec needle = product_mean();
  needle.log_likelihood = [](const double* x, const double* t) {
    (void)x;
    return -1e12 * (t[0] * t[0] + t[1] * t[1]);
  };
  needle.loglik_sum_factory = nullptr;
  needle.sample_prior = [](Rng&, double* t) { t[0] = 0.0; t[1] = 0.0; };
  McmcConfig nc = quick_config(2, 200);
  nc.warmup = 60;
  nc.initial_step = 1e4;
  CHECK_THROWS_WITH_AS(run_mcmc(needle, sample_true(needle, 10, 1), nc),
                       doctest::Contains("adaptation failure"),
                       std::runtime_error);
}

TEST_CASE("acceptance rates adapt toward the target") {
  ModelSpec cj = conjugate_normal(1.0);
  Dataset data = sample_true(cj, 50, 71);
  McmcConfig cfg = quick_config(73, 4000);
  ChainSet cs = run_mcmc(cj, data, cfg);
  for (double r : cs.accept_rate) {
    CHECK(r > 0.15);
    CHECK(r < 0.5);
  }
}

TEST_CASE("chains csv has one row per retained draw") {
  ModelSpec pm = product_mean();
  Dataset data = sample_true(pm, 10, 5);
  ChainSet cs = run_mcmc(pm, data, quick_config(3, 100, 2));
  std::string path = "/tmp/slt_test_chains.csv";
  write_chains_csv(cs, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "chain,iter,theta_1,theta_2");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 200);
  std::filesystem::remove(path);
}
