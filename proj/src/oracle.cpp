#include "capmeter/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

void require_positive_n(double n) {
  if (!(n > 0.0) || !std::isfinite(n))
    throw Error(ErrorCode::InvalidArgument, "sample size must be positive and finite");
}

void require_nonnegative(const HessianSpectrum& spec) {
  for (double l : spec.eigenvalues())
    if (l < 0.0) throw Error(ErrorCode::InvalidSpectrum, "negative eigenvalue " + std::to_string(l));
}

void require_strictly_positive(const HessianSpectrum& spec) {
  for (double l : spec.eigenvalues())
    if (!(l > 0.0))
      throw Error(ErrorCode::InvalidSpectrum, "non-positive eigenvalue " + std::to_string(l));
}

}  // namespace

HessianSpectrum::HessianSpectrum(std::vector<double> eigenvalues, double epsilon,
                                 std::optional<std::vector<double>> offsets)
    : epsilon_(epsilon) {
  if (eigenvalues.empty()) throw Error(ErrorCode::InvalidSpectrum, "spectrum needs at least one eigenvalue");
  for (double l : eigenvalues)
    if (!std::isfinite(l)) throw Error(ErrorCode::InvalidSpectrum, "non-finite eigenvalue");
  if (!std::isfinite(epsilon) || epsilon < 0.0)
    throw Error(ErrorCode::InvalidSpectrum, "prior precision must be finite and non-negative");
  if (offsets && offsets->size() != eigenvalues.size())
    throw Error(ErrorCode::InvalidSpectrum, "offsets length " + std::to_string(offsets->size()) +
                                                " does not match p = " + std::to_string(eigenvalues.size()));

  std::vector<std::size_t> order(eigenvalues.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return eigenvalues[i] > eigenvalues[j]; });
  eigenvalues_.reserve(order.size());
  for (std::size_t i : order) eigenvalues_.push_back(eigenvalues[i]);
  if (offsets) {
    std::vector<double> permuted;
    permuted.reserve(order.size());
    for (std::size_t i : order) {
      if (!std::isfinite((*offsets)[i])) throw Error(ErrorCode::InvalidSpectrum, "non-finite offset");
      permuted.push_back((*offsets)[i]);
    }
    offsets_ = std::move(permuted);
  }
}

double quad_log_z(const HessianSpectrum& spec, const PriorKind& prior, double n) {
  require_positive_n(n);
  if (std::holds_alternative<UniformPrior>(prior)) {
    double acc = 0.0;
    for (double l : spec.eigenvalues()) {
      if (!(l > 0.0))
        throw Error(ErrorCode::DivergentPartition,
                    "uniform prior with non-positive eigenvalue " + std::to_string(l));
      acc += std::log(2.0 * std::numbers::pi / (n * l));
    }
    return 0.5 * acc;
  }

  const double eps = std::get<GaussianPrior>(prior).epsilon;
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "Gaussian prior needs epsilon > 0");
  require_nonnegative(spec);

  const auto lambdas = spec.eigenvalues();
  double acc = 0.0;
  for (double l : lambdas) acc += std::log(eps / (n * l + eps));
  double log_z = 0.5 * acc;

  if (const auto& b = spec.offsets()) {
    double sq = 0.0;
    double shrunk = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      const double bi2 = (*b)[i] * (*b)[i];
      sq += bi2;
      shrunk += bi2 / (n * lambdas[i] + eps);
    }
    log_z += -0.5 * eps * sq + 0.5 * eps * eps * shrunk;
  }
  return log_z;
}

double quad_capacity_exact(const HessianSpectrum& spec, double n) {
  require_positive_n(n);
  require_nonnegative(spec);
  const double eps = spec.epsilon();
  double acc = 0.0;
  for (double l : spec.eigenvalues()) {
    const double nl = n * l;
    if (nl == 0.0) continue;
    const double r = nl / (nl + eps);
    acc += r * r;
  }
  return 0.5 * acc;
}

double quad_capacity_hm(const HessianSpectrum& spec) {
  require_strictly_positive(spec);
  double inv_sum = 0.0;
  for (double l : spec.eigenvalues()) inv_sum += 1.0 / l;
  const double p = static_cast<double>(spec.p());
  return 0.5 * p - spec.epsilon() * (inv_sum / p);
}

std::size_t pacbayes_effective_dim(const HessianSpectrum& spec, std::int64_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "effective dimension needs N >= 2");
  const double threshold = spec.epsilon() / (2.0 * static_cast<double>(n - 1));
  return static_cast<std::size_t>(std::count_if(spec.eigenvalues().begin(), spec.eigenvalues().end(),
                                                [&](double l) { return std::abs(l) >= threshold; }));
}

double pacbayes_bound(const HessianSpectrum& spec, std::int64_t n, double kappa, double dist_sq) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be positive");
  if (!(dist_sq >= 0.0)) throw Error(ErrorCode::InvalidArgument, "squared distance must be non-negative");
  const std::size_t r = pacbayes_effective_dim(spec, n);

  std::vector<double> magnitudes;
  magnitudes.reserve(spec.p());
  for (double l : spec.eigenvalues()) magnitudes.push_back(std::abs(l));
  std::sort(magnitudes.begin(), magnitudes.end(), std::greater<>());

  const double two_nm1 = 2.0 * static_cast<double>(n - 1);
  const double eps = spec.epsilon();
  double log_sum = 0.0;
  for (std::size_t i = 0; i < r; ++i) log_sum += std::log(two_nm1 * magnitudes[i] + eps);
  return (log_sum + 2.0 / kappa + eps * dist_sq) / (2.0 * two_nm1);
}

EpsilonChoice pacbayes_epsilon_default(const HessianSpectrum& spec) {
  require_strictly_positive(spec);
  double inv_sum = 0.0;
  double log_sum = 0.0;
  for (double l : spec.eigenvalues()) {
    inv_sum += 1.0 / l;
    log_sum += std::log(l);
  }
  const double hm = static_cast<double>(spec.p()) / inv_sum;
  const double raw = -2.0 * hm * log_sum;
  if (raw > kEpsilonFloor) return {raw, raw, false};
  return {kEpsilonFloor, raw, true};
}

double avg_energy_from_logz(const LogPartition& logz, double n) { return logz(n) - logz(n + 1.0); }

double capacity_from_logz(const LogPartition& logz, double n) {
  return n * n * (logz(n - 1.0) - 2.0 * logz(n) + logz(n + 1.0));
}

double prob_complement_energy_from_logz(const LogPartition& logz, double n) {
  return -std::expm1(logz(n + 1.0) - logz(n));
}

PriorSampler uniform_box_sampler(double lo, double hi) {
  if (!(hi > lo)) throw Error(ErrorCode::InvalidArgument, "uniform box needs hi > lo");
  return [lo, hi](Rng& rng, std::span<double> w) {
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& x : w) x = u(rng);
  };
}

RlctEstimate rlct_volume_estimate(const WeightEnergy& energy, const PriorSampler& sampler,
                                  const RlctOptions& options) {
  if (options.dim == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  if (!(options.eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "level eps must be positive");
  if (!(options.a > 1.0)) throw Error(ErrorCode::InvalidArgument, "level ratio a must exceed 1");
  if (options.n_samples == 0) throw Error(ErrorCode::InvalidArgument, "need at least one sample");

  Rng rng(options.seed);
  std::vector<double> w(options.dim);
  const double high = options.a * options.eps;
  std::uint64_t low_hits = 0;
  std::uint64_t high_hits = 0;
  // One sample set serves both levels, so V(eps) is counted inside V(a eps).
  for (std::uint64_t s = 0; s < options.n_samples; ++s) {
    sampler(rng, w);
    const double h = energy(w);
    if (h <= high) {
      ++high_hits;
      if (h <= options.eps) ++low_hits;
    }
  }
  if (low_hits < 20)
    throw Error(ErrorCode::InsufficientHits,
                std::to_string(low_hits) + " of " + std::to_string(options.n_samples) +
                    " samples below level eps; need at least 20");

  const double log_a = std::log(options.a);
  const double value = std::log(static_cast<double>(high_hits) / static_cast<double>(low_hits)) / log_a;
  // Given the high-level count, the low-level count is binomial with rate V(eps)/V(a eps).
  const double var_log = std::max(0.0, 1.0 / static_cast<double>(low_hits) - 1.0 / static_cast<double>(high_hits));
  return {value, std::sqrt(var_log) / log_a, low_hits, high_hits, options.n_samples};
}

}  // namespace capmeter
