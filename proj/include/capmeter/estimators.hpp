#pragma once

// Capacity estimates from an averaged energy curve: a monotone-constrained polynomial
// in log N and the sigmoid capacity model fitted through its integrated energy.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "capmeter/records.hpp"

namespace capmeter {

enum class CapacityMethod { Polynomial, Sigmoid, Sgld, Analytic };
std::string_view to_string(CapacityMethod m);

struct CapacityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t at_n = 0;
  CapacityMethod method = CapacityMethod::Analytic;
  // Set when the uncertainty comes from a linearisation that ignores active constraints.
  bool approximate = false;
};

// ---------------------------------------------------------------------------
// Polynomial energy model

struct PolynomialEnergyModel {
  int degree = 7;
  // Coefficients of U as a polynomial in t = (log N - center) / half_width.
  Eigen::VectorXd coeffs;
  double center = 0.0;
  double half_width = 1.0;
  double n_min = 0.0;
  double n_max = 0.0;
  std::vector<double> constraint_grid;  // N values where both constraints were imposed
  std::size_t active_constraints = 0;
  Eigen::MatrixXd covariance;           // of coeffs, from the unconstrained fit

  double energy(double n) const;
  double energy_slope(double n) const;  // dU/dN
};

inline constexpr std::size_t kConstraintGridPoints = 64;

// Weighted least squares (weights 1/stderr^2) subject to dU/dN <= 0 and dC/dN >= 0 on
// a log-spaced grid; solved through its least-distance dual with nonnegative least squares.
PolynomialEnergyModel fit_monotone_polynomial(const EnergyCurve& curve, int degree = 7);

// C = -N^2 dU/dN from the analytic derivative. OutOfRange outside [n_min, n_max].
CapacityEstimate capacity_from_polynomial(const PolynomialEnergyModel& model, double n);

// ---------------------------------------------------------------------------
// Sigmoid capacity model: C(N) = a / (1 + exp(-c log N + b)),
// U(N) = u_inf + int_N^inf C(k) / k^2 dk.

struct SigmoidCapacityModel {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double u_inf = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // over (a, b, c, u_inf)
  double residual_rms = 0.0;
  double chi_square = 0.0;
  std::vector<double> residuals;  // observed minus fitted energy, per curve point
  int iterations = 0;
  int start_index = -1;

  double capacity(double n) const;
};

struct SigmoidInit {
  double a;
  double b;
  double c;
  double u_inf;
};

double energy_from_sigmoid(const SigmoidCapacityModel& model, double n);

// Energy and its partial derivatives with respect to (a, b, c, u_inf).
std::array<double, 5> energy_from_sigmoid_with_gradient(double a, double b, double c, double u_inf, double n);

struct LmOptions {
  int max_iterations = 500;
  double rel_tol = 1e-10;
  double initial_damping = 1e-3;
};

// Levenberg-Marquardt over (a, b, log c, u_inf), multi-started from the given init and
// eight deterministic starts; lowest chi-square wins, ties to the earliest start.
SigmoidCapacityModel fit_sigmoid_capacity(const EnergyCurve& curve, std::optional<SigmoidInit> init = std::nullopt,
                                          const LmOptions& options = {});

// The deterministic starts used by fit_sigmoid_capacity.
std::vector<SigmoidInit> sigmoid_starts(const EnergyCurve& curve);

CapacityEstimate capacity_from_sigmoid(const SigmoidCapacityModel& model, double n);

// ---------------------------------------------------------------------------
// Freezing threshold

enum class Guidance { ProcureMoreData, Transition, SearchArchitectures };
std::string_view to_string(Guidance g);

inline constexpr double kMinSlope = 1e-6;

struct FreezingThreshold {
  double n_star;  // exp(b / c), where C = a / 2

  Guidance guidance(double n_current) const;
};

FreezingThreshold freezing_threshold(const SigmoidCapacityModel& model);

}  // namespace capmeter
