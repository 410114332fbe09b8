#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slt/rng.hpp"

namespace slt {

// One local chart of the limiting posterior: nodes u with du* weights, the
// learning coefficient lambda, and the Gaussian-field covariance over nodes.
// uk holds u^k per node (used by the a(x,u) = u^k - sqrt(2) x worked case).
struct ChartGrid {
  int dim = 0;  // 0 = scalar-xi case with a single (empty) node
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  double lambda = 0.5;
  std::vector<std::vector<double>> covariance;
  std::vector<double> uk;  // optional, defaults to 0 per node

  std::size_t nodes() const { return points.size(); }
  void validate() const;
};

struct XiField {
  std::vector<double> values;
};

// Zero-mean Gaussian draw over the grid nodes via symmetric eigenfactoring.
// Errors if the covariance has an eigenvalue below -1e-10.
XiField sample_xi(const ChartGrid& grid, std::uint64_t seed);

// <F> under the renormalized posterior:
//   [sum_i w_i INT F(t,u_i) t^(lambda-1) exp(-t + sqrt(t) xi_i) dt] / [F==1].
// The t integral runs to T_max = max(50, 10 (1+max xi)^2), where the
// truncated tail is below 1e-10 of the total.
double renorm_expectation(
    const std::function<double(double t, const std::vector<double>& u)>& f,
    const XiField& xi, const ChartGrid& grid);

// |<t^alpha> - (lambda+alpha-1) <t^(alpha-1)> - (1/2) <t^(alpha-1/2) xi>|.
double check_partial_integration(double alpha, const XiField& xi,
                                 const ChartGrid& grid);

struct IdentityCheck {
  double lhs = 0.0;     // E_xi <sqrt(t) xi(u)>
  double rhs = 0.0;     // E_xi V(xi)
  double stderr_ = 0.0;  // SE of the per-draw difference
};

// Monte-Carlo check of E_xi[<sqrt(t) xi>] = E_xi[V(xi)] with
// V(xi) = E_X[<t a(X,u)^2> - <sqrt(t) a(X,u)>^2], a(x,u) = uk - sqrt(2) x,
// X ~ N(0,1) integrated by quadrature.
IdentityCheck functional_identity_check(const ChartGrid& grid, int draws,
                                        std::uint64_t seed);

// chi(xi) = -log( sum_i w_i INT t^(lambda-1) exp(-t + sqrt(t) xi_i) dt ).
double chi(const XiField& xi, const ChartGrid& grid);

ChartGrid grid_from_json(const std::string& text);
std::string grid_to_json(const ChartGrid& grid);

}  // namespace slt
