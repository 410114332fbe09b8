#include "slt/renormalized.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "slt/mathutil.hpp"
#include "slt/parallel.hpp"
#include "slt/quadrature.hpp"

namespace slt {

void ChartGrid::validate() const {
  if (points.empty()) throw std::invalid_argument("grid has no nodes");
  if (weights.size() != points.size())
    throw std::invalid_argument("weights/nodes size mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  bool any = false;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative du* weight");
    if (w > 0.0) any = true;
  }
  if (!any) throw std::invalid_argument("all du* weights are zero");
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != dim)
      throw std::invalid_argument("node dimension mismatch");
    for (double c : p)
      if (c < 0.0 || c > 1.0)
        throw std::invalid_argument("node outside [0,1]^dim");
  }
  if (!covariance.empty()) {
    if (covariance.size() != points.size())
      throw std::invalid_argument("covariance size mismatch");
    for (const auto& row : covariance)
      if (row.size() != points.size())
        throw std::invalid_argument("covariance not square");
  }
  if (!uk.empty() && uk.size() != points.size())
    throw std::invalid_argument("uk size mismatch");
}

namespace {

constexpr std::uint64_t kXiTag = 0x7869ULL;  // "xi"

// Cyclic Jacobi eigendecomposition of a symmetric matrix (grids are small).
void jacobi_eigen(std::vector<std::vector<double>> a,
                  std::vector<double>& eigvals,
                  std::vector<std::vector<double>>& eigvecs) {
  std::size_t n = a.size();
  eigvecs.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) eigvecs[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-28) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vip = eigvecs[i][p], viq = eigvecs[i][q];
          eigvecs[i][p] = c * vip - s * viq;
          eigvecs[i][q] = s * vip + c * viq;
        }
      }
  }
  eigvals.resize(n);
  for (std::size_t i = 0; i < n; ++i) eigvals[i] = a[i][i];
}

double grid_smax(const XiField& xi) {
  double mx = 0.0;
  for (double v : xi.values) mx = std::max(mx, v);
  double tmax = std::max(50.0, 10.0 * (1.0 + mx) * (1.0 + mx));
  return std::sqrt(tmax);
}

// INT_0^{smax^2} f(t) t^(lambda-1) exp(-t + sqrt(t) xi) dt via t = s^2,
// with the exponential peak factored out; returns {log_scale, mantissa}.
struct ScaledIntegral {
  double log_scale = 0.0;
  double mantissa = 0.0;

  double value() const { return std::exp(log_scale) * mantissa; }
};

ScaledIntegral integral_t(double lambda, double xi, double smax,
                          const std::function<double(double)>& f) {
  double peak = xi > 0.0 ? 0.25 * xi * xi : 0.0;
  auto g = [&](double s) {
    double t = s * s;
    double base = 2.0 * std::pow(s, 2.0 * lambda - 1.0) *
                  std::exp(-t + s * xi - peak);
    return f(t) * base;
  };
  double prev = integrate_gl(g, 0.0, smax, 8);
  for (int panels : {16, 32, 64}) {
    double cur = integrate_gl(g, 0.0, smax, panels);
    if (std::fabs(cur - prev) <= 1e-12 * (1.0 + std::fabs(cur)))
      return {peak, cur};
    prev = cur;
  }
  return {peak, prev};
}

const std::function<double(double)> kOne = [](double) { return 1.0; };

}  // namespace

XiField sample_xi(const ChartGrid& grid, std::uint64_t seed) {
  grid.validate();
  std::size_t n = grid.nodes();
  if (grid.covariance.empty())
    throw std::invalid_argument("sample_xi needs a covariance");
  std::vector<double> eigvals;
  std::vector<std::vector<double>> eigvecs;
  jacobi_eigen(grid.covariance, eigvals, eigvecs);
  for (double e : eigvals)
    if (e < -1e-10)
      throw std::runtime_error("covariance not positive semidefinite");
  Rng rng(mix_seed(seed, kXiTag));
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  XiField xi;
  xi.values.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double scale = std::sqrt(std::max(eigvals[j], 0.0));
    if (scale == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      xi.values[i] += eigvecs[i][j] * scale * z[j];
  }
  return xi;
}

double renorm_expectation(
    const std::function<double(double t, const std::vector<double>& u)>& f,
    const XiField& xi, const ChartGrid& grid) {
  grid.validate();
  if (xi.values.size() != grid.nodes())
    throw std::invalid_argument("xi/grid size mismatch");
  double smax = grid_smax(xi);
  long double numer = 0.0L, denom = 0.0L;
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    if (grid.weights[i] == 0.0) continue;
    const auto& u = grid.points[i];
    auto fi = [&](double t) { return f(t, u); };
    ScaledIntegral top = integral_t(grid.lambda, xi.values[i], smax, fi);
    ScaledIntegral bot = integral_t(grid.lambda, xi.values[i], smax, kOne);
    numer += static_cast<long double>(grid.weights[i]) * top.value();
    denom += static_cast<long double>(grid.weights[i]) * bot.value();
  }
  double d = static_cast<double>(denom);
  if (!(d > 0.0) || !std::isfinite(d))
    throw std::runtime_error("degenerate weight");
  return static_cast<double>(numer) / d;
}

double check_partial_integration(double alpha, const XiField& xi,
                                 const ChartGrid& grid) {
  if (!(alpha >= 1.0)) throw std::invalid_argument("alpha must be >= 1");
  grid.validate();
  if (xi.values.size() != grid.nodes())
    throw std::invalid_argument("xi/grid size mismatch");
  double smax = grid_smax(xi);
  long double denom = 0.0L, n_a = 0.0L, n_am1 = 0.0L, n_ah = 0.0L;
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    double w = grid.weights[i];
    if (w == 0.0) continue;
    double x = xi.values[i];
    auto pow_t = [&](double p) {
      return integral_t(grid.lambda, x, smax,
                        [p](double t) { return std::pow(t, p); })
          .value();
    };
    denom += w * integral_t(grid.lambda, x, smax, kOne).value();
    n_a += w * pow_t(alpha);
    n_am1 += w * pow_t(alpha - 1.0);
    n_ah += w * x * pow_t(alpha - 0.5);
  }
  if (!(denom > 0.0L)) throw std::runtime_error("degenerate weight");
  double lhs = static_cast<double>(n_a / denom);
  double rhs = (grid.lambda + alpha - 1.0) * static_cast<double>(n_am1 / denom) +
               0.5 * static_cast<double>(n_ah / denom);
  return std::fabs(lhs - rhs);
}

IdentityCheck functional_identity_check(const ChartGrid& grid, int draws,
                                        std::uint64_t seed) {
  grid.validate();
  if (draws < 2) throw std::invalid_argument("need at least 2 xi draws");
  std::size_t nn = grid.nodes();
  std::vector<double> uk(nn, 0.0);
  if (!grid.uk.empty()) uk = grid.uk;
  // a(x, u_i) = uk_i - g_i x with g_i^2 = Cov_ii, so E[a(X,u)a(X,v)] =
  // uk_u uk_v + Cov matches the xi covariance for the constant-c grids.
  if (grid.covariance.empty())
    throw std::invalid_argument("functional identity needs a covariance");
  std::vector<double> g(nn, 0.0);
  for (std::size_t i = 0; i < nn; ++i)
    g[i] = std::sqrt(std::max(grid.covariance[i][i], 0.0));

  sample_xi(grid, seed);  // fail fast outside the parallel region if not PSD

  std::vector<double> lhss(draws), rhss(draws);
  std::string failure;
  parallel_for(draws, [&](std::size_t r) {
    XiField xi = sample_xi(grid, mix_seed(seed, r));
    double smax = grid_smax(xi);
    // per-node t moments
    long double denom = 0.0L;
    long double sum_sqrt_xi = 0.0L;             // w xi <sqrt t>_node
    long double a_ = 0.0L, b_ = 0.0L, c_ = 0.0L;  // t uk^2, t uk, t
    long double d_ = 0.0L, e_ = 0.0L;             // sqrt t uk, sqrt t
    for (std::size_t i = 0; i < nn; ++i) {
      double w = grid.weights[i];
      if (w == 0.0) continue;
      double x = xi.values[i];
      double i1 = integral_t(grid.lambda, x, smax, kOne).value();
      double it = integral_t(grid.lambda, x, smax,
                             [](double t) { return t; })
                      .value();
      double ih = integral_t(grid.lambda, x, smax,
                             [](double t) { return std::sqrt(t); })
                      .value();
      denom += w * i1;
      sum_sqrt_xi += w * x * ih;
      a_ += w * uk[i] * uk[i] * it;
      b_ += w * uk[i] * g[i] * it;
      c_ += w * g[i] * g[i] * it;
      d_ += w * uk[i] * ih;
      e_ += w * g[i] * ih;
    }
    if (!(denom > 0.0L)) {
#pragma omp critical
      failure = "degenerate weight";
      return;
    }
    double lhs = static_cast<double>(sum_sqrt_xi / denom);
    double ta = static_cast<double>(a_ / denom);
    double tb = static_cast<double>(b_ / denom);
    double tc = static_cast<double>(c_ / denom);
    double sd = static_cast<double>(d_ / denom);
    double se = static_cast<double>(e_ / denom);
    // V(xi) = E_X[<t a^2> - <sqrt t a>^2], a = uk - g X, X ~ N(0,1)
    auto vx = [&](double xq) {
      double ta2 = ta - 2.0 * xq * tb + xq * xq * tc;
      double sa = sd - xq * se;
      return (ta2 - sa * sa) * std::exp(normal_logpdf(xq, 0.0, 1.0));
    };
    double rhs = integrate_gl(vx, -10.0, 10.0, 20);
    lhss[r] = lhs;
    rhss[r] = rhs;
  });
  if (!failure.empty()) throw std::runtime_error(failure);

  IdentityCheck out;
  out.lhs = mean_of(lhss);
  out.rhs = mean_of(rhss);
  std::vector<double> diffs(draws);
  for (int r = 0; r < draws; ++r) diffs[r] = lhss[r] - rhss[r];
  out.stderr_ = stderr_of_mean(diffs);
  return out;
}

double chi(const XiField& xi, const ChartGrid& grid) {
  grid.validate();
  if (xi.values.size() != grid.nodes())
    throw std::invalid_argument("xi/grid size mismatch");
  double smax = grid_smax(xi);
  LogMeanExp lse;
  std::size_t used = 0;
  for (std::size_t i = 0; i < grid.nodes(); ++i) {
    if (grid.weights[i] == 0.0) continue;
    ScaledIntegral s = integral_t(grid.lambda, xi.values[i], smax, kOne);
    if (!(s.mantissa > 0.0) || !std::isfinite(s.mantissa))
      throw std::runtime_error("chi underflow");
    lse.add(std::log(grid.weights[i]) + s.log_scale + std::log(s.mantissa));
    ++used;
  }
  // LogMeanExp divides by the count; add it back to get the plain log-sum.
  return -(lse.value() + std::log(static_cast<double>(used)));
}

ChartGrid grid_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ChartGrid g;
  g.lambda = j.at("lambda").get<double>();
  g.points = j.at("nodes").get<std::vector<std::vector<double>>>();
  g.weights = j.at("weights").get<std::vector<double>>();
  g.dim = g.points.empty() ? 0 : static_cast<int>(g.points.front().size());
  if (j.contains("covariance"))
    g.covariance = j["covariance"].get<std::vector<std::vector<double>>>();
  if (j.contains("uk")) g.uk = j["uk"].get<std::vector<double>>();
  g.validate();
  return g;
}

std::string grid_to_json(const ChartGrid& grid) {
  nlohmann::json j;
  j["lambda"] = grid.lambda;
  j["nodes"] = grid.points;
  j["weights"] = grid.weights;
  if (!grid.covariance.empty()) j["covariance"] = grid.covariance;
  if (!grid.uk.empty()) j["uk"] = grid.uk;
  return j.dump(2);
}

}  // namespace slt
