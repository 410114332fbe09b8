#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace slt {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double normal_logpdf(double x, double mu, double var) {
  double d = x - mu;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// Phi(x) via erfc, used for prior normalization over truncated domains.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

// Streaming log-mean-exp with online max rescaling; one pass, no storage.
class LogMeanExp {
 public:
  void add(double x) {
    if (n_ == 0) {
      max_ = x;
      sum_ = 1.0;
    } else if (x > max_) {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    } else {
      sum_ += std::exp(x - max_);
    }
    ++n_;
  }
  double value() const {
    if (n_ == 0) throw std::runtime_error("log-mean-exp of empty set");
    return max_ + std::log(sum_ / static_cast<double>(n_));
  }
  void merge(const LogMeanExp& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    if (other.max_ > max_) {
      sum_ = sum_ * std::exp(max_ - other.max_) + other.sum_;
      max_ = other.max_;
    } else {
      sum_ += other.sum_ * std::exp(other.max_ - max_);
    }
    n_ += other.n_;
  }
  std::size_t count() const { return n_; }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  std::size_t n_ = 0;
};

// Welford running mean/variance.
class RunningMoments {
 public:
  void add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  // unbiased sample variance
  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double population_variance() const {
    return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0;
  }
  void merge(const RunningMoments& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
      *this = other;
      return;
    }
    double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
    double d = other.mean_ - mean_;
    double nt = na + nb;
    mean_ += d * nb / nt;
    m2_ += other.m2_ + d * d * na * nb / nt;
    n_ += other.n_;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Standard error of the mean over independent replicates.
inline double stderr_of_mean(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

// Batch-means Monte Carlo standard error for a single correlated series.
inline double batch_means_mcse(const std::vector<double>& series) {
  std::size_t n = series.size();
  if (n < 4) return 0.0;
  std::size_t b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  std::size_t nb = n / b;
  if (nb < 2) return 0.0;
  RunningMoments batch;
  for (std::size_t k = 0; k < nb; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < b; ++j) s += series[k * b + j];
    batch.add(s / static_cast<double>(b));
  }
  return std::sqrt(batch.variance() / static_cast<double>(nb));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

// Ordinary least squares y = a + b x with residual-based slope SE.
inline LineFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  if (n != y.size() || n < 2) throw std::invalid_argument("ols_fit: bad input");
  double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("ols_fit: degenerate x");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

}  // namespace slt
