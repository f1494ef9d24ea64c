#pragma once

// Closed-form and semi-analytic reference quantities for quadratic energies
// H(w) = 1/2 (w - w*)^T A (w - w*), PAC-Bayes effective dimensionality, and the
// volume-ratio estimator of the real log-canonical threshold.
//
// N is accepted as a real number throughout so that limits and derivatives can be
// probed; the integer-step forms used elsewhere simply evaluate at integer N.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "capmeter/rng.hpp"

namespace capmeter {

// Eigen-decomposition of the loss Hessian plus the isotropic prior precision.
// Eigenvalues are kept sorted non-increasing; offsets (components of w* - w0 in the
// eigenbasis) are permuted along with them.
class HessianSpectrum {
 public:
  HessianSpectrum(std::vector<double> eigenvalues, double epsilon,
                  std::optional<std::vector<double>> offsets = std::nullopt);

  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double epsilon() const { return epsilon_; }
  std::size_t p() const { return eigenvalues_.size(); }
  const std::optional<std::vector<double>>& offsets() const { return offsets_; }

 private:
  std::vector<double> eigenvalues_;
  double epsilon_;
  std::optional<std::vector<double>> offsets_;
};

struct UniformPrior {};
struct GaussianPrior {
  double epsilon;
};
using PriorKind = std::variant<UniformPrior, GaussianPrior>;

// Isotropic Gaussian prior with the spectrum's own precision.
inline PriorKind gaussian_prior(const HessianSpectrum& spec) { return GaussianPrior{spec.epsilon()}; }

double quad_log_z(const HessianSpectrum& spec, const PriorKind& prior, double n);

/// Exact capacity under the Gaussian prior: 1/2 sum (N l / (N l + eps))^2.
double quad_capacity_exact(const HessianSpectrum& spec, double n);

/// Harmonic-mean approximation p/2 - eps * mean(1/l).
double quad_capacity_hm(const HessianSpectrum& spec);

// Number of |l_i| at or above eps / (2(N - 1)).
std::size_t pacbayes_effective_dim(const HessianSpectrum& spec, std::int64_t n);

// Analytic Gaussian PAC-Bayes bound. The log sum runs over the eigenvalues counted by
// pacbayes_effective_dim (largest magnitudes first).
double pacbayes_bound(const HessianSpectrum& spec, std::int64_t n, double kappa, double dist_sq);

struct EpsilonChoice {
  double value;
  double raw;
  bool clamped;
};

inline constexpr double kEpsilonFloor = 1e-8;

EpsilonChoice pacbayes_epsilon_default(const HessianSpectrum& spec);

using LogPartition = std::function<double(double)>;

// U(N) = log Z(N) - log Z(N + 1).
double avg_energy_from_logz(const LogPartition& logz, double n);

// C(N) ~ N^2 [log Z(N-1) - 2 log Z(N) + log Z(N+1)].
double capacity_from_logz(const LogPartition& logz, double n);

// Expected probability complement 1 - Z(N+1)/Z(N): what the Markov-chain energy
// estimator targets when every example contributes the same per-example likelihood.
double prob_complement_energy_from_logz(const LogPartition& logz, double n);

struct RlctEstimate {
  double value;
  double std_error;
  std::uint64_t hits_low;   // samples with energy <= eps
  std::uint64_t hits_high;  // samples with energy <= a * eps
  std::uint64_t samples;
};

using WeightEnergy = std::function<double(std::span<const double>)>;

// Fills `w` with one draw from the prior.
using PriorSampler = std::function<void(Rng&, std::span<double>)>;

PriorSampler uniform_box_sampler(double lo, double hi);

struct RlctOptions {
  std::size_t dim = 1;
  double eps = 0.01;
  double a = 2.0;
  std::uint64_t n_samples = 1'000'000;
  std::uint64_t seed = 0;
};

RlctEstimate rlct_volume_estimate(const WeightEnergy& energy, const PriorSampler& sampler,
                                  const RlctOptions& options);

}  // namespace capmeter
