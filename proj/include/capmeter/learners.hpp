#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "capmeter/dataset.hpp"
#include "capmeter/models.hpp"

namespace capmeter {

// A trained model. Immutable after fit, so it can be shared for concurrent reads.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;
  virtual double log_prob(std::span<const double> x, double y) const = 0;
  // Flat weights for differentiable models; empty otherwise.
  virtual std::span<const double> weights() const { return {}; }
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual std::string describe() const = 0;

  // Deterministic given (data, rows, seed). Throws EmptyTrainingSet / NonFiniteLoss.
  virtual std::unique_ptr<PredictiveModel> fit(const Dataset& data, std::span<const std::size_t> rows,
                                               std::uint64_t seed) const = 0;

  // The likelihood model this learner trains, when it has one (for gradients and
  // Langevin sampling). Null for non-parametric learners.
  virtual std::shared_ptr<const ParametricModel> parametric_model(const Dataset&) const { return nullptr; }
};

struct KnnConfig {
  int k = 10;
  double alpha = 1.0;  // additive smoothing of neighbour counts
  double sigma = 1.0;  // regression only
};

struct LogisticConfig {
  double l2 = 1e-4;
  // Precision of a N(0, I / prior_precision) weight prior; the MAP objective adds
  // prior_precision / (2 n) |w|^2 to the mean NLL of n training rows.
  double prior_precision = 0.0;
  int epochs = 2000;
  double lr = 1.0;       // capped at 1/L for the objective's smoothness constant L
  double grad_tol = 1e-9;
  double sigma = 1.0;    // regression only
};

struct MlpConfig {
  std::size_t hidden = 16;
  int epochs = 50;
  double lr_max = 0.1;
  std::size_t batch = 64;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double sigma = 1.0;
  // Rescale inputs by one scalar so the training rows have unit mean squared norm.
  bool normalize_inputs = true;
};

std::unique_ptr<Learner> knn_learner(const KnnConfig& config);
std::unique_ptr<Learner> logistic_learner(const LogisticConfig& config);
std::unique_ptr<Learner> mlp_learner(const MlpConfig& config);

// Predicts the uniform distribution over classes regardless of the training rows.
std::unique_ptr<Learner> constant_learner();

}  // namespace capmeter
