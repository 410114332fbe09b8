#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

namespace slt {

struct QuadRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre nodes by Newton iteration on the Legendre recurrence.
// Cached per thread; map nodes stay valid across nested calls.
inline const QuadRule& gauss_legendre(int order) {
  static thread_local std::map<int, QuadRule> cache;
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  QuadRule& rule = cache[order];
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[order - 1 - i] = rule.weights[i];
  }
  return rule;
}

// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
// Long double accumulation keeps the renormalized-measure identities below
// the 1e-8 residual contract.
template <class F>
double integrate_gl(F&& f, double a, double b, int panels, int order = 16) {
  const QuadRule& r = gauss_legendre(order);
  long double total = 0.0L;
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    double c = lo + 0.5 * h;
    long double acc = 0.0L;
    for (int k = 0; k < order; ++k) {
      acc += static_cast<long double>(r.weights[k]) * f(c + 0.5 * h * r.nodes[k]);
    }
    total += acc * (0.5L * h);
  }
  return static_cast<double>(total);
}

// Tensor-product quadrature over a box, dims 1..3; used for prior
// normalization checks and small posterior oracles.
inline double integrate_box(const std::function<double(const double*)>& f,
                            const std::vector<double>& lo,
                            const std::vector<double>& hi,
                            int panels, int order = 8) {
  std::size_t d = lo.size();
  if (d == 1) {
    return integrate_gl([&](double x) { return f(&x); }, lo[0], hi[0], panels, order);
  }
  if (d == 2) {
    return integrate_gl(
        [&](double x) {
          return integrate_gl(
              [&](double y) {
                double p[2] = {x, y};
                return f(p);
              },
              lo[1], hi[1], panels, order);
        },
        lo[0], hi[0], panels, order);
  }
  if (d == 3) {
    return integrate_gl(
        [&](double x) {
          return integrate_gl(
              [&](double y) {
                return integrate_gl(
                    [&](double z) {
                      double p[3] = {x, y, z};
                      return f(p);
                    },
                    lo[2], hi[2], panels, order);
              },
              lo[1], hi[1], panels, order);
        },
        lo[0], hi[0], panels, order);
  }
  throw std::invalid_argument("integrate_box: dimension > 3");
}

}  // namespace slt
