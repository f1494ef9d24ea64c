#include <algorithm>
#include <cmath>

#include "capmeter/errors.hpp"
#include "capmeter/estimators.hpp"

namespace capmeter {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row of basis values t^k, k = 0..degree.
VectorXd powers(double t, int degree) {
  VectorXd v(degree + 1);
  v(0) = 1.0;
  for (int k = 1; k <= degree; ++k) v(k) = v(k - 1) * t;
  return v;
}

// d/dt of the basis.
VectorXd d_powers(double t, int degree) {
  VectorXd v = VectorXd::Zero(degree + 1);
  double tp = 1.0;  // t^(k-1)
  for (int k = 1; k <= degree; ++k) {
    v(k) = k * tp;
    tp *= t;
  }
  return v;
}

VectorXd d2_powers(double t, int degree) {
  VectorXd v = VectorXd::Zero(degree + 1);
  double tp = 1.0;  // t^(k-2)
  for (int k = 2; k <= degree; ++k) {
    v(k) = k * (k - 1) * tp;
    tp *= t;
  }
  return v;
}

// Lawson-Hanson non-negative least squares: min |A x - b| subject to x >= 0.
// Returns x; `passive` receives the indices with x > 0.
VectorXd nnls(const MatrixXd& a, const VectorXd& b, std::vector<Index>& passive, double tol) {
  const Index n = a.cols();
  VectorXd x = VectorXd::Zero(n);
  std::vector<bool> in_p(static_cast<std::size_t>(n), false);
  passive.clear();
  const int max_outer = 3 * static_cast<int>(n) + 10;

  auto solve_passive = [&](VectorXd& s) {
    MatrixXd ap(a.rows(), static_cast<Index>(passive.size()));
    for (std::size_t k = 0; k < passive.size(); ++k) ap.col(static_cast<Index>(k)) = a.col(passive[k]);
    const VectorXd sp = ap.completeOrthogonalDecomposition().solve(b);
    s = VectorXd::Zero(n);
    for (std::size_t k = 0; k < passive.size(); ++k) s(passive[k]) = sp(static_cast<Index>(k));
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    const VectorXd w = a.transpose() * (b - a * x);
    Index j = -1;
    double best = tol;
    for (Index i = 0; i < n; ++i)
      if (!in_p[static_cast<std::size_t>(i)] && w(i) > best) {
        best = w(i);
        j = i;
      }
    if (j < 0) return x;
    in_p[static_cast<std::size_t>(j)] = true;
    passive.push_back(j);

    for (int inner = 0; inner < 3 * static_cast<int>(n) + 10; ++inner) {
      VectorXd s;
      solve_passive(s);
      bool all_positive = true;
      for (Index i : passive) all_positive = all_positive && s(i) > 0.0;
      if (all_positive) {
        x = s;
        break;
      }
      double alpha = 1.0;
      for (Index i : passive)
        if (s(i) <= 0.0) alpha = std::min(alpha, x(i) / (x(i) - s(i)));
      x += alpha * (s - x);
      std::vector<Index> keep;
      for (Index i : passive) {
        if (x(i) <= tol) {
          x(i) = 0.0;
          in_p[static_cast<std::size_t>(i)] = false;
        } else {
          keep.push_back(i);
        }
      }
      passive = std::move(keep);
    }
  }
  throw Error(ErrorCode::SolverFailure, "non-negative least squares did not converge in " +
                                            std::to_string(max_outer) + " iterations");
}

struct ConstrainedFit {
  VectorXd x;
  std::size_t active = 0;
};

// min |A x - b| subject to G x <= 0, via the least-distance reformulation: with
// A = QR and z = R x - Q'b the problem becomes min |z| s.t. -G R^-1 z >= G R^-1 Q'b,
// whose solution follows from one NNLS on the dual.
ConstrainedFit constrained_least_squares(const MatrixXd& a, const VectorXd& b, const MatrixXd& g) {
  const Index n = a.cols();
  const Eigen::HouseholderQR<MatrixXd> qr(a);
  const MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  const VectorXd c = (qr.householderQ().transpose() * b).head(n);
  for (Index i = 0; i < n; ++i)
    if (!(std::abs(r(i, i)) > 1e-13 * std::abs(r(0, 0))))
      throw Error(ErrorCode::SolverFailure, "polynomial design matrix is rank deficient");

  // E = G R^-1, rows scaled to unit length.
  MatrixXd e = r.transpose().triangularView<Eigen::Lower>().solve(g.transpose()).transpose();
  for (Index i = 0; i < e.rows(); ++i) {
    const double norm = e.row(i).norm();
    if (norm > 0.0) e.row(i) /= norm;
  }
  const MatrixXd gt = -e;
  const VectorXd ht = e * c;

  const Index q = gt.rows();
  MatrixXd m(n + 1, q);
  m.topRows(n) = gt.transpose();
  m.row(n) = ht.transpose();
  VectorXd rhs = VectorXd::Zero(n + 1);
  rhs(n) = 1.0;

  std::vector<Index> passive;
  const double tol = 1e-12 * std::max(1.0, m.cwiseAbs().colwise().sum().maxCoeff()) * static_cast<double>(n + q);
  const VectorXd u = nnls(m, rhs, passive, tol);
  const VectorXd resid = m * u - rhs;
  if (!(std::abs(resid(n)) > 1e-14))
    throw Error(ErrorCode::SolverFailure, "monotonicity constraints are infeasible");
  const VectorXd z = -resid.head(n) / resid(n);

  ConstrainedFit fit;
  fit.x = r.triangularView<Eigen::Upper>().solve(z + c);
  fit.active = passive.size();
  return fit;
}

}  // namespace

std::string_view to_string(CapacityMethod m) {
  switch (m) {
    case CapacityMethod::Polynomial: return "polynomial";
    case CapacityMethod::Sigmoid: return "sigmoid";
    case CapacityMethod::Sgld: return "sgld";
    case CapacityMethod::Analytic: return "analytic";
  }
  return "unknown";
}

double PolynomialEnergyModel::energy(double n) const {
  const double t = (std::log(n) - center) / half_width;
  return powers(t, degree).dot(coeffs);
}

double PolynomialEnergyModel::energy_slope(double n) const {
  const double t = (std::log(n) - center) / half_width;
  return d_powers(t, degree).dot(coeffs) / (half_width * n);
}

PolynomialEnergyModel fit_monotone_polynomial(const EnergyCurve& curve, int degree) {
  if (degree < 1) throw Error(ErrorCode::InvalidArgument, "polynomial degree must be at least 1");
  curve.validate();
  const auto m = static_cast<Index>(curve.points.size());
  if (m < degree + 2)
    throw Error(ErrorCode::InsufficientPoints, "degree " + std::to_string(degree) + " needs at least " +
                                                   std::to_string(degree + 2) + " points, curve has " +
                                                   std::to_string(m));
  if (curve.n_min() <= 0) throw Error(ErrorCode::InvalidArgument, "sample sizes must be positive");

  PolynomialEnergyModel model;
  model.degree = degree;
  model.n_min = static_cast<double>(curve.n_min());
  model.n_max = static_cast<double>(curve.n_max());
  const double x_lo = std::log(model.n_min);
  const double x_hi = std::log(model.n_max);
  model.center = 0.5 * (x_lo + x_hi);
  model.half_width = 0.5 * (x_hi - x_lo);
  if (!(model.half_width > 0.0)) throw Error(ErrorCode::InsufficientPoints, "curve spans a single N");

  // Weights 1/stderr^2; zero stderr is floored at the smallest positive one, or all
  // weights are one if none is positive.
  double min_se = 0.0;
  for (const auto& p : curve.points)
    if (p.u_stderr > 0.0 && (min_se == 0.0 || p.u_stderr < min_se)) min_se = p.u_stderr;
  const bool weighted = min_se > 0.0;

  const int nc = degree + 1;
  MatrixXd design(m, nc);
  VectorXd u(m);
  VectorXd wts(m);
  for (Index i = 0; i < m; ++i) {
    const auto& p = curve.points[static_cast<std::size_t>(i)];
    const double t = (std::log(static_cast<double>(p.n)) - model.center) / model.half_width;
    design.row(i) = powers(t, degree).transpose();
    u(i) = p.u_mean;
    const double se = weighted ? std::max(p.u_stderr, min_se) : 1.0;
    wts(i) = 1.0 / (se * se);
  }

  const MatrixXd h = design.transpose() * wts.asDiagonal() * design;

  // dU/dN <= 0  <=>  P'(t) <= 0;  dC/dN >= 0  <=>  P'(t) + P''(t) / half_width <= 0.
  const auto grid_n = static_cast<Index>(kConstraintGridPoints);
  MatrixXd g(2 * grid_n, nc);
  model.constraint_grid.resize(kConstraintGridPoints);
  for (Index k = 0; k < grid_n; ++k) {
    const double t = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(grid_n - 1);
    model.constraint_grid[static_cast<std::size_t>(k)] = std::exp(model.center + t * model.half_width);
    const VectorXd d1 = d_powers(t, degree);
    g.row(2 * k) = d1.transpose();
    g.row(2 * k + 1) = (d1 + d2_powers(t, degree) / model.half_width).transpose();
  }

  const VectorXd sqrt_w = wts.cwiseSqrt();
  const MatrixXd a = sqrt_w.asDiagonal() * design;
  const VectorXd b = sqrt_w.cwiseProduct(u);
  const auto fit = constrained_least_squares(a, b, g);

  constexpr double kConstraintTol = 1e-9;
  const double scale = std::max(1.0, fit.x.cwiseAbs().maxCoeff());
  const double violation = (g * fit.x).maxCoeff();
  if (violation > kConstraintTol * scale)
    throw Error(ErrorCode::SolverFailure, "constraint violation " + std::to_string(violation) +
                                              " after the constrained solve");
  model.coeffs = fit.x;
  model.active_constraints = fit.active;

  // Unconstrained covariance; residual-scaled when no uncertainties were supplied.
  const MatrixXd h_inv = h.completeOrthogonalDecomposition().pseudoInverse();
  if (weighted) {
    model.covariance = h_inv;
  } else {
    const VectorXd resid = design * model.coeffs - u;
    const double dof = static_cast<double>(std::max<Index>(1, m - nc));
    model.covariance = h_inv * (resid.squaredNorm() / dof);
  }
  return model;
}

CapacityEstimate capacity_from_polynomial(const PolynomialEnergyModel& model, double n) {
  const double slack = 1e-9 * model.n_max;
  if (!(n >= model.n_min - slack && n <= model.n_max + slack))
    throw Error(ErrorCode::OutOfRange, "N=" + std::to_string(n) + " outside fitted range [" +
                                           std::to_string(model.n_min) + ", " + std::to_string(model.n_max) + "]");
  const double t = (std::log(n) - model.center) / model.half_width;
  // C = -N^2 dU/dN = -N P'(t) / half_width.
  const VectorXd grad = -(n / model.half_width) * d_powers(t, model.degree);
  CapacityEstimate est;
  est.value = grad.dot(model.coeffs);
  est.std_error = std::sqrt(std::max(0.0, grad.dot(model.covariance * grad)));
  est.at_n = static_cast<std::int64_t>(std::llround(n));
  est.method = CapacityMethod::Polynomial;
  est.approximate = model.active_constraints > 0;
  return est;
}

}  // namespace capmeter
