#include "capmeter/statistics.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "capmeter/errors.hpp"

namespace capmeter {

double kendall_tau(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size())
    throw Error(ErrorCode::LengthMismatch, std::to_string(xs.size()) + " vs " + std::to_string(ys.size()));
  if (xs.size() < 2) throw Error(ErrorCode::InvalidArgument, "Kendall tau needs at least two items");

  long long concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, pairs = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      ++pairs;
      const double dx = xs[i] - xs[j];
      const double dy = ys[i] - ys[j];
      if (dx == 0.0) ++tied_x;
      if (dy == 0.0) ++tied_y;
      if (dx == 0.0 || dy == 0.0) continue;
      ((dx > 0) == (dy > 0) ? concordant : discordant) += 1;
    }
  }
  const double denom = std::sqrt(static_cast<double>(pairs - tied_x) * static_cast<double>(pairs - tied_y));
  if (denom == 0.0) throw Error(ErrorCode::AllTied, "one of the variables is constant");
  return static_cast<double>(concordant - discordant) / denom;
}

RegressionResult capacity_loss_regression(std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  if (n < 3) throw Error(ErrorCode::InsufficientPoints, "regression needs at least 3 points, got " + std::to_string(n));

  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateDesign, "all capacities are equal");

  RegressionResult r{};
  r.n = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  double sse = 0.0;
  for (const auto& [x, y] : points) {
    const double e = y - (r.intercept + r.slope * x);
    sse += e * e;
  }
  const double dof = static_cast<double>(n - 2);
  r.slope_stderr = std::sqrt(sse / dof / sxx);
  if (r.slope_stderr == 0.0) {
    r.t_statistic = r.slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.slope);
    r.p_value = r.slope == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t_statistic = r.slope / r.slope_stderr;
  const boost::math::students_t dist(dof);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic)));
  return r;
}

}  // namespace capmeter
