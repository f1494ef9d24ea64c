#pragma once

// Stochastic gradient Langevin dynamics over the Gibbs posterior
// p(w; N) ~ prior(w) exp(-N H(w)), and the Markov-chain estimators of U and C.
//
// The energy estimate here is the mean probability complement 1 - p_w(y | x) over
// held-out rows, not an NLL; curves produced by this module carry the
// "probability-complement" scale tag.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capmeter/dataset.hpp"
#include "capmeter/estimators.hpp"
#include "capmeter/models.hpp"
#include "capmeter/oracle.hpp"
#include "capmeter/records.hpp"
#include "capmeter/rng.hpp"

namespace capmeter {

class DifferentiableEnergy {
 public:
  virtual ~DifferentiableEnergy() = default;

  virtual std::size_t dim() const = 0;
  // Number of data rows the energy can draw on.
  virtual std::size_t rows() const = 0;
  virtual std::string name() const = 0;
  virtual void initialize(Rng& rng, std::span<double> w) const = 0;

  // Mean per-example NLL over `rows` (H restricted to that subset).
  virtual double value(std::span<const double> w, std::span<const std::size_t> rows) const = 0;
  // Gradient of value(); overwrites `out`.
  virtual void gradient(std::span<const double> w, std::span<const std::size_t> rows, std::span<double> out) const = 0;
  // p_w(y_row | x_row).
  virtual double per_example_prob(std::span<const double> w, std::size_t row) const = 0;
};

// Energy of a parametric likelihood model on a dataset.
class ModelEnergy final : public DifferentiableEnergy {
 public:
  ModelEnergy(std::shared_ptr<const ParametricModel> model, const Dataset& data);

  std::size_t dim() const override { return model_->dim(); }
  std::size_t rows() const override { return data_.size(); }
  std::string name() const override { return model_->name(); }
  void initialize(Rng& rng, std::span<double> w) const override { model_->initialize(rng, w); }
  double value(std::span<const double> w, std::span<const std::size_t> rows) const override;
  void gradient(std::span<const double> w, std::span<const std::size_t> rows, std::span<double> out) const override;
  double per_example_prob(std::span<const double> w, std::size_t row) const override;

 private:
  std::shared_ptr<const ParametricModel> model_;
  const Dataset& data_;
};

// H(w) = 1/2 (w - w*)' A (w - w*) for every example, so each example has likelihood
// exp(-H(w)) and the Gibbs posterior and partition function are Gaussian closed forms.
class QuadraticEnergy final : public DifferentiableEnergy {
 public:
  QuadraticEnergy(Eigen::MatrixXd hessian, Eigen::VectorXd minimum, std::size_t rows);
  // Diagonal Hessian with the given eigenvalues and minimum at the origin.
  static QuadraticEnergy diagonal(std::span<const double> eigenvalues, std::size_t rows);

  std::size_t dim() const override { return static_cast<std::size_t>(minimum_.size()); }
  std::size_t rows() const override { return rows_; }
  std::string name() const override { return "quadratic-test"; }
  void initialize(Rng& rng, std::span<double> w) const override;
  double value(std::span<const double> w, std::span<const std::size_t> rows) const override;
  void gradient(std::span<const double> w, std::span<const std::size_t> rows, std::span<double> out) const override;
  double per_example_prob(std::span<const double> w, std::size_t row) const override;

 private:
  Eigen::MatrixXd hessian_;
  Eigen::VectorXd minimum_;
  std::size_t rows_;
};

// One Langevin update:
//   w' = w - (step/2) grad[N H_batch(w) - log prior(w)] + sqrt(step) xi.
// Throws NonFiniteState (naming step_index) if the new state is not finite.
std::vector<double> sgld_step(std::span<const double> w, const DifferentiableEnergy& energy,
                              std::span<const std::size_t> rows, double n, const PriorKind& prior, double step,
                              Rng& rng, std::size_t step_index = 0);

// Per-sample mean of 1 - p_w(y|x) over the held-out rows.
std::vector<double> sgld_sample_energies(std::span<const std::vector<double>> samples,
                                         const DifferentiableEnergy& energy, std::span<const std::size_t> heldout);

// Average of sgld_sample_energies. Throws EmptyHeldout / EmptyWindow.
double sgld_avg_energy(std::span<const std::vector<double>> samples, const DifferentiableEnergy& energy,
                       std::span<const std::size_t> heldout);

// C = -N^2 [U(N + delta) - U(N)] / delta from two sample windows evaluated on the same
// held-out rows; stderr from the between-sample variance of each window.
CapacityEstimate sgld_capacity(std::span<const std::vector<double>> window_t,
                               std::span<const std::vector<double>> window_t_plus,
                               const DifferentiableEnergy& energy, std::span<const std::size_t> heldout, double n,
                               double delta_n);

struct SgldConfig {
  double step_size = 1e-3;
  std::size_t chains = 10;
  std::size_t equilibration_epochs = 20;
  std::size_t samples_per_window = 10;
  std::vector<std::size_t> n_schedule;
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t steps_per_epoch = 0;  // 0: one pass over the chain's training rows
  std::size_t burn_in_epochs = 0;   // extra epochs before the first window
  PriorKind prior = GaussianPrior{1.0};
  std::size_t threads = 1;
};

struct SgldResult {
  EnergyCurve curve;                          // probability-complement scale
  std::vector<CapacityEstimate> capacities;   // one per consecutive schedule pair
  std::vector<EnergyRecord> records;          // boot = chain, fold = 0, seed = sample
  std::size_t surviving_chains = 0;
  std::vector<std::string> chain_failures;
};

// Chains own disjoint folds of a seeded row order (position r belongs to fold
// r mod chains). At schedule size N, chain c samples p(w; N) using the first N rows
// outside its fold and evaluates on the rows inside it, so growing N to N' adds
// about (N' - N)/chains rows to every fold. Chains continue from their previous
// state. Runs while at least half the chains survive (else ChainFailure).
SgldResult run_incremental_protocol(const DifferentiableEnergy& energy, const SgldConfig& config,
                                    const std::string& dataset_id = "sgld");

}  // namespace capmeter
