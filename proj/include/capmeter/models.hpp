#pragma once

// Differentiable parametric likelihood models p_w(y | x) over a flat weight vector.
// The learners train them and the Langevin sampler explores their Gibbs posterior,
// so both go through the same gradient code.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "capmeter/dataset.hpp"
#include "capmeter/rng.hpp"

namespace capmeter {

struct OutputSpec {
  Task task = Task::Classification;
  int m_classes = 2;
  double sigma = 1.0;  // regression noise scale
};

OutputSpec output_spec_for(const Dataset& data, double sigma = 1.0);

// log N(y; f, sigma^2), constant included so values are comparable across sigma.
double gaussian_log_prob(double y, double f, double sigma);

class ParametricModel {
 public:
  virtual ~ParametricModel() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
  virtual void initialize(Rng& rng, std::span<double> w) const = 0;

  virtual double log_prob(std::span<const double> w, std::span<const double> x, double y) const = 0;

  // Summed negative log-likelihood over the rows of `x`. When `grad` is non-empty the
  // gradient of the sum is added into it.
  virtual double nll_sum(std::span<const double> w, const RowMatrix& x, std::span<const double> y,
                         std::span<double> grad) const = 0;

  // Same, over selected rows of a dataset.
  double nll_sum(std::span<const double> w, const Dataset& data, std::span<const std::size_t> rows,
                 std::span<double> grad) const;
};

// Multinomial logistic regression with class 0 as the reference class, so a
// d-feature, m-class model has (m - 1)(d + 1) free parameters. For regression the
// single output is a linear predictor with Gaussian noise.
class LinearModel final : public ParametricModel {
 public:
  LinearModel(std::size_t d, OutputSpec out);

  std::size_t dim() const override { return outputs_ * (d_ + 1); }
  std::string name() const override { return "linear"; }
  void initialize(Rng& rng, std::span<double> w) const override;
  double log_prob(std::span<const double> w, std::span<const double> x, double y) const override;
  double nll_sum(std::span<const double> w, const RowMatrix& x, std::span<const double> y,
                 std::span<double> grad) const override;
  using ParametricModel::nll_sum;

 private:
  std::size_t d_;
  OutputSpec out_;
  std::size_t outputs_;
};

// One hidden ReLU layer followed by a softmax (or linear regression) head.
class MlpModel final : public ParametricModel {
 public:
  MlpModel(std::size_t d, std::size_t hidden, OutputSpec out);

  std::size_t dim() const override;
  std::string name() const override { return "mlp"; }
  void initialize(Rng& rng, std::span<double> w) const override;
  double log_prob(std::span<const double> w, std::span<const double> x, double y) const override;
  double nll_sum(std::span<const double> w, const RowMatrix& x, std::span<const double> y,
                 std::span<double> grad) const override;
  using ParametricModel::nll_sum;

  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t d_;
  std::size_t hidden_;
  OutputSpec out_;
  std::size_t outputs_;
};

}  // namespace capmeter
