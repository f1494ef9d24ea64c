#pragma once

#include <functional>
#include <span>
#include <vector>

namespace capmeter {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  std::size_t max_intervals = 2000;
  std::size_t order = 15;  // Gauss-Legendre points per panel
};

// Globally adaptive Gauss-Legendre integration of a vector-valued integrand over
// [lo, hi]. Each panel's error is estimated by comparing one panel against its two
// halves; the worst panel is bisected until the summed error (max over components)
// is within abs_tol. Throws QuadratureFailure if max_intervals is reached first.
using VectorIntegrand = std::function<void(double x, std::span<double> out)>;

std::vector<double> integrate(const VectorIntegrand& f, std::size_t components, double lo, double hi,
                              const QuadratureOptions& options = {});

double integrate(const std::function<double(double)>& f, double lo, double hi, const QuadratureOptions& options = {});

// Nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendreRule& gauss_legendre_rule(std::size_t order);

}  // namespace capmeter
