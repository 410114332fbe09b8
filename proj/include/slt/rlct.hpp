#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "slt/model.hpp"
#include "slt/sampler.hpp"

namespace slt {

// Minimal exact rational for the chart algebra.
struct Rational {
  long long num = 0;
  long long den = 1;

  Rational() = default;
  Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    long long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double to_double() const { return static_cast<double>(num) / den; }

  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den <
           static_cast<__int128>(b.num) * a.den;
  }
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend Rational operator+(const Rational& a, const Rational& b) {
    return Rational(a.num * b.den + b.num * a.den, a.den * b.den);
  }
};

// One local resolution chart: K looks like u^(2k) with prior Jacobian u^h.
struct NormalCrossingChart {
  std::vector<int> k;
  std::vector<int> h;
};

struct RlctResult {
  Rational lambda;
  int m = 1;
};

// lambda = min over charts and coordinates of (h_j+1)/(2 k_j), with k_j = 0
// contributing infinity; m = max over lambda-attaining charts of the number
// of attaining coordinates.
RlctResult rlct_of_charts(const std::vector<NormalCrossingChart>& charts);

Rational rlct_sum(const std::vector<RlctResult>& parts);
Rational rlct_product(const std::vector<RlctResult>& parts);

std::vector<NormalCrossingChart> charts_from_json(const std::string& text);
std::string rlct_result_json(const RlctResult& r);

struct LambdaEstimate {
  double lambda = 0.0;
  double stderr_ = 0.0;
};

// Single-dataset two-temperature statistic:
// (E_{b1}[nL_n] - E_{b2}[nL_n]) / (1/b1 - 1/b2), b1 = 1/log n,
// b2 = 1.5/log n.  Optional MCSE propagated from the two posterior means.
double two_temperature_lambda(const ModelSpec& model, const Dataset& data,
                              const McmcConfig& config,
                              double* mcse_out = nullptr);

// Mean and SE of the two-temperature statistic across replicate datasets.
LambdaEstimate estimate_rlct_wbic(const ModelSpec& model, int n,
                                  int replicates, const McmcConfig& config);

// Prior-volume estimator: slope of log P[K(theta) < eps] against log eps by
// OLS over grid points with at least 100 hits; SE from a 16-way batch split.
LambdaEstimate estimate_rlct_volume(const ModelSpec& model,
                                    const std::vector<double>& eps_grid,
                                    long long prior_samples,
                                    std::uint64_t seed);

}  // namespace slt
