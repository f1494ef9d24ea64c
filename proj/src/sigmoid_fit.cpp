#include <algorithm>
#include <cmath>
#include <limits>

#include "capmeter/errors.hpp"
#include "capmeter/estimators.hpp"
#include "capmeter/quadrature.hpp"

namespace capmeter {

namespace {

using Eigen::Index;
using Eigen::Matrix4d;
using Eigen::MatrixXd;
using Eigen::Vector4d;
using Eigen::VectorXd;

// 1 / (1 + exp(t)) without overflow.
double logistic_complement(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

struct Fit {
  Vector4d theta;  // (a, b, log c, u_inf)
  double chi2 = std::numeric_limits<double>::infinity();
  VectorXd resid;  // weighted
  MatrixXd jac;
  int iterations = 0;
};

class SigmoidProblem {
 public:
  explicit SigmoidProblem(const EnergyCurve& curve) {
    double min_se = 0.0;
    for (const auto& p : curve.points)
      if (p.u_stderr > 0.0 && (min_se == 0.0 || p.u_stderr < min_se)) min_se = p.u_stderr;
    for (const auto& p : curve.points) {
      n_.push_back(static_cast<double>(p.n));
      u_.push_back(p.u_mean);
      sigma_.push_back(min_se > 0.0 ? std::max(p.u_stderr, min_se) : 1.0);
    }
  }

  std::size_t size() const { return n_.size(); }
  double observed(std::size_t i) const { return u_[i]; }
  double n(std::size_t i) const { return n_[i]; }

  // Fills weighted residuals and Jacobian; false if the point is not admissible.
  bool evaluate(const Vector4d& theta, VectorXd& resid, MatrixXd& jac) const {
    if (!theta.allFinite() || theta(0) < 0.0 || theta(2) > 40.0) return false;
    const double c = std::exp(theta(2));
    const auto m = static_cast<Index>(n_.size());
    resid.resize(m);
    jac.resize(m, 4);
    try {
      for (Index i = 0; i < m; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const auto e = energy_from_sigmoid_with_gradient(theta(0), theta(1), c, theta(3), n_[k]);
        resid(i) = (u_[k] - e[0]) / sigma_[k];
        jac(i, 0) = -e[1] / sigma_[k];
        jac(i, 1) = -e[2] / sigma_[k];
        jac(i, 2) = -e[3] * c / sigma_[k];
        jac(i, 3) = -e[4] / sigma_[k];
      }
    } catch (const Error&) {
      return false;
    }
    return resid.allFinite() && jac.allFinite();
  }

 private:
  std::vector<double> n_, u_, sigma_;
};

Fit levenberg_marquardt(const SigmoidProblem& problem, const SigmoidInit& init, const LmOptions& options) {
  Fit fit;
  fit.theta << init.a, init.b, std::log(std::max(init.c, 1e-12)), init.u_inf;
  if (!problem.evaluate(fit.theta, fit.resid, fit.jac)) return fit;
  fit.chi2 = fit.resid.squaredNorm();

  double damping = options.initial_damping;
  VectorXd trial_resid;
  MatrixXd trial_jac;
  for (int it = 0; it < options.max_iterations; ++it) {
    fit.iterations = it + 1;
    const Matrix4d jtj = fit.jac.transpose() * fit.jac;
    const Vector4d grad = fit.jac.transpose() * fit.resid;
    // Marquardt scaling: damping relative to the curvature of each parameter.
    Vector4d diag = jtj.diagonal();
    const double floor = std::max(1e-300, 1e-12 * diag.maxCoeff());
    diag = diag.cwiseMax(floor);

    const Matrix4d lhs = jtj + damping * Matrix4d(diag.asDiagonal());
    const Vector4d step = lhs.ldlt().solve(-grad);
    const Vector4d trial = fit.theta + step;

    if (step.allFinite() && problem.evaluate(trial, trial_resid, trial_jac)) {
      const double chi2 = trial_resid.squaredNorm();
      if (chi2 < fit.chi2) {
        const double rel = (fit.chi2 - chi2) / std::max(fit.chi2, std::numeric_limits<double>::min());
        fit.theta = trial;
        fit.chi2 = chi2;
        fit.resid = trial_resid;
        fit.jac = trial_jac;
        damping = std::max(damping / 10.0, 1e-15);
        if (rel < options.rel_tol || chi2 == 0.0) break;
        continue;
      }
    }
    damping *= 10.0;
    if (damping > 1e16) break;  // no descent direction left at machine precision
  }
  return fit;
}

}  // namespace

std::array<double, 5> energy_from_sigmoid_with_gradient(double a, double b, double c, double u_inf, double n) {
  if (!(n >= 1.0)) throw Error(ErrorCode::InvalidArgument, "energy_from_sigmoid needs N >= 1");
  // With u = 1/k the tail integral becomes int_0^{1/N} a / (1 + e^b u^c) du.
  const auto parts = integrate(
      [&](double u, std::span<double> out) {
        const double log_u = std::log(u);
        const double s = logistic_complement(b + c * log_u);
        const double ds = s * (1.0 - s);
        out[0] = a * s;
        out[1] = s;
        out[2] = -a * ds;
        out[3] = -a * ds * log_u;
      },
      4, 0.0, 1.0 / n);
  return {u_inf + parts[0], parts[1], parts[2], parts[3], 1.0};
}

double energy_from_sigmoid(const SigmoidCapacityModel& model, double n) {
  if (!(n >= 1.0)) throw Error(ErrorCode::InvalidArgument, "energy_from_sigmoid needs N >= 1");
  if (std::isinf(n)) return model.u_inf;
  const double a = model.a, b = model.b, c = model.c;
  return model.u_inf +
         integrate([&](double u) { return a * logistic_complement(b + c * std::log(u)); }, 0.0, 1.0 / n);
}

double SigmoidCapacityModel::capacity(double n) const { return a * logistic_complement(b - c * std::log(n)); }

std::vector<SigmoidInit> sigmoid_starts(const EnergyCurve& curve) {
  const auto& pts = curve.points;
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double n0 = static_cast<double>(pts[i].n);
    const double n1 = static_cast<double>(pts[i + 1].n);
    // Exact for U = K / N.
    gaps.push_back(n0 * n1 * (pts[i].u_mean - pts[i + 1].u_mean) / (n1 - n0));
  }
  const double c_max = *std::max_element(gaps.begin(), gaps.end());
  const double floor = std::max(1e-6, 1e-3 * std::abs(c_max));
  const double candidates[] = {gaps.front(), gaps.back(), c_max, 2.0 * c_max};

  double log_gm = 0.0;
  for (const auto& p : pts) log_gm += std::log(static_cast<double>(p.n));
  log_gm /= static_cast<double>(pts.size());
  double u_min = pts.front().u_mean;
  for (const auto& p : pts) u_min = std::min(u_min, p.u_mean);

  std::vector<SigmoidInit> starts;
  for (const double c0 : {0.5, 2.0})
    for (const double a0 : candidates) starts.push_back({std::max(a0, floor), c0 * log_gm, c0, u_min});
  return starts;
}

SigmoidCapacityModel fit_sigmoid_capacity(const EnergyCurve& curve, std::optional<SigmoidInit> init,
                                          const LmOptions& options) {
  if (curve.points.size() < 5)
    throw Error(ErrorCode::DegenerateCurve, "sigmoid fit needs at least 5 points, curve has " +
                                                std::to_string(curve.points.size()));
  curve.validate();
  const SigmoidProblem problem(curve);

  std::vector<SigmoidInit> starts;
  if (init) starts.push_back(*init);
  for (const auto& s : sigmoid_starts(curve)) starts.push_back(s);

  Fit best;
  int best_index = -1;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    Fit f = levenberg_marquardt(problem, starts[s], options);
    if (std::isfinite(f.chi2) && f.chi2 < best.chi2) {
      best = std::move(f);
      best_index = static_cast<int>(s);
    }
  }
  if (best_index < 0) throw Error(ErrorCode::FitDiverged, "all " + std::to_string(starts.size()) + " starts failed");

  SigmoidCapacityModel model;
  model.a = best.theta(0);
  model.b = best.theta(1);
  model.c = std::exp(best.theta(2));
  model.u_inf = best.theta(3);
  model.chi_square = best.chi2;
  model.iterations = best.iterations;
  model.start_index = best_index;

  const auto m = problem.size();
  const double dof = static_cast<double>(m) - 4.0;
  const Matrix4d jtj = best.jac.transpose() * best.jac;
  const Matrix4d cov_theta = jtj.completeOrthogonalDecomposition().pseudoInverse() * (best.chi2 / dof);
  const Vector4d to_c(1.0, 1.0, model.c, 1.0);  // d(a, b, c, u_inf) / d(a, b, log c, u_inf)
  model.covariance = to_c.asDiagonal() * cov_theta * to_c.asDiagonal();

  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = problem.observed(i) - energy_from_sigmoid(model, problem.n(i));
    model.residuals.push_back(r);
    ss += r * r;
  }
  model.residual_rms = std::sqrt(ss / static_cast<double>(m));
  return model;
}

CapacityEstimate capacity_from_sigmoid(const SigmoidCapacityModel& model, double n) {
  const double s = logistic_complement(model.b - model.c * std::log(n));
  const double ds = s * (1.0 - s);
  const Eigen::Vector3d grad(s, -model.a * ds, model.a * ds * std::log(n));
  CapacityEstimate est;
  est.value = model.a * s;
  est.std_error = std::sqrt(std::max(0.0, grad.dot(model.covariance.topLeftCorner<3, 3>() * grad)));
  est.at_n = static_cast<std::int64_t>(std::llround(n));
  est.method = CapacityMethod::Sigmoid;
  return est;
}

std::string_view to_string(Guidance g) {
  switch (g) {
    case Guidance::ProcureMoreData: return "procure more data";
    case Guidance::Transition: return "transition";
    case Guidance::SearchArchitectures: return "search for a different architecture";
  }
  return "unknown";
}

Guidance FreezingThreshold::guidance(double n_current) const {
  if (n_current < n_star) return Guidance::ProcureMoreData;
  if (n_current > 10.0 * n_star) return Guidance::SearchArchitectures;
  return Guidance::Transition;
}

FreezingThreshold freezing_threshold(const SigmoidCapacityModel& model) {
  if (!(model.c > kMinSlope))
    throw Error(ErrorCode::UndefinedThreshold, "capacity slope c = " + std::to_string(model.c) + " is flat");
  return {std::exp(model.b / model.c)};
}

}  // namespace capmeter
