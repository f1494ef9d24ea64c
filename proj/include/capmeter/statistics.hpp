#pragma once

#include <span>
#include <utility>
#include <vector>

namespace capmeter {

// Tie-corrected Kendall tau-b. Throws LengthMismatch, InvalidArgument (< 2 items) or
// AllTied when either variable has no untied pair.
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

struct RegressionResult {
  double slope;
  double intercept;
  double slope_stderr;
  double t_statistic;
  double p_value;  // two-sided, H0: slope = 0
  std::size_t n;
};

// Ordinary least squares of loss on capacity over (capacity, loss) pairs.
RegressionResult capacity_loss_regression(std::span<const std::pair<double, double>> points);

}  // namespace capmeter
