#include "capmeter/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "capmeter/errors.hpp"

namespace capmeter {

const GaussLegendreRule& gauss_legendre_rule(std::size_t order) {
  static std::mutex mu;
  static std::map<std::size_t, GaussLegendreRule> cache;
  std::lock_guard lock(mu);
  if (auto it = cache.find(order); it != cache.end()) return it->second;
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "quadrature order must be positive");

  GaussLegendreRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const auto n = static_cast<double>(order);
  for (std::size_t i = 0; i < order; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= order; ++k) {
        const auto kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

namespace {

struct Panel {
  double lo;
  double hi;
  std::vector<double> value;  // refined (two-half) estimate
  double error;
};

void panel_sum(const VectorIntegrand& f, const GaussLegendreRule& rule, double lo, double hi,
               std::vector<double>& acc, std::vector<double>& scratch) {
  std::fill(acc.begin(), acc.end(), 0.0);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    f(mid + half * rule.nodes[i], scratch);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += rule.weights[i] * half * scratch[c];
  }
}

Panel evaluate(const VectorIntegrand& f, const GaussLegendreRule& rule, std::size_t k, double lo, double hi) {
  std::vector<double> whole(k), left(k), right(k), scratch(k);
  const double mid = 0.5 * (lo + hi);
  panel_sum(f, rule, lo, hi, whole, scratch);
  panel_sum(f, rule, lo, mid, left, scratch);
  panel_sum(f, rule, mid, hi, right, scratch);
  Panel p{lo, hi, std::vector<double>(k), 0.0};
  for (std::size_t c = 0; c < k; ++c) {
    p.value[c] = left[c] + right[c];
    p.error = std::max(p.error, std::abs(p.value[c] - whole[c]));
  }
  return p;
}

}  // namespace

std::vector<double> integrate(const VectorIntegrand& f, std::size_t components, double lo, double hi,
                              const QuadratureOptions& options) {
  if (components == 0) return {};
  if (lo == hi) return std::vector<double>(components, 0.0);
  const auto& rule = gauss_legendre_rule(options.order);

  std::vector<Panel> panels{evaluate(f, rule, components, lo, hi)};
  auto total_error = [&] {
    double e = 0.0;
    for (const auto& p : panels) e += p.error;
    return e;
  };
  while (total_error() > options.abs_tol) {
    if (panels.size() >= options.max_intervals)
      throw Error(ErrorCode::QuadratureFailure, "tolerance not met after " + std::to_string(panels.size()) + " panels");
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& a, const Panel& b) { return a.error < b.error; });
    const double a = worst->lo;
    const double b = worst->hi;
    const double mid = 0.5 * (a + b);
    if (!(mid > std::min(a, b) && mid < std::max(a, b)))
      throw Error(ErrorCode::QuadratureFailure, "panel collapsed below machine resolution");
    *worst = evaluate(f, rule, components, a, mid);
    panels.push_back(evaluate(f, rule, components, mid, b));
  }

  // Sum in position order so the result does not depend on refinement history.
  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.lo < y.lo; });
  std::vector<double> result(components, 0.0);
  for (const auto& p : panels)
    for (std::size_t c = 0; c < components; ++c) result[c] += p.value[c];
  for (double v : result)
    if (!std::isfinite(v)) throw Error(ErrorCode::QuadratureFailure, "non-finite integral");
  return result;
}

double integrate(const std::function<double(double)>& f, double lo, double hi, const QuadratureOptions& options) {
  return integrate([&](double x, std::span<double> out) { out[0] = f(x); }, 1, lo, hi, options)[0];
}

}  // namespace capmeter
