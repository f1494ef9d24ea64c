#include "capmeter/sgld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "capmeter/errors.hpp"
#include "capmeter/parallel.hpp"

namespace capmeter {

namespace {

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double mean_of(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

void require_window(std::span<const std::vector<double>> samples, std::span<const std::size_t> heldout) {
  if (heldout.empty()) throw Error(ErrorCode::EmptyHeldout, "held-out set is empty");
  if (samples.empty()) throw Error(ErrorCode::EmptyWindow, "sample window is empty");
}

}  // namespace

// ---------------------------------------------------------------------------
// Energies

ModelEnergy::ModelEnergy(std::shared_ptr<const ParametricModel> model, const Dataset& data)
    : model_(std::move(model)), data_(data) {
  if (!model_) throw Error(ErrorCode::InvalidArgument, "model energy needs a model");
}

double ModelEnergy::value(std::span<const double> w, std::span<const std::size_t> rows) const {
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "energy over an empty row set");
  return model_->nll_sum(w, data_, rows, {}) / static_cast<double>(rows.size());
}

void ModelEnergy::gradient(std::span<const double> w, std::span<const std::size_t> rows,
                           std::span<double> out) const {
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "energy over an empty row set");
  std::fill(out.begin(), out.end(), 0.0);
  model_->nll_sum(w, data_, rows, out);
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& g : out) g *= inv;
}

double ModelEnergy::per_example_prob(std::span<const double> w, std::size_t row) const {
  return std::exp(model_->log_prob(w, data_.row(row), data_.label(row)));
}

QuadraticEnergy::QuadraticEnergy(Eigen::MatrixXd hessian, Eigen::VectorXd minimum, std::size_t rows)
    : hessian_(std::move(hessian)), minimum_(std::move(minimum)), rows_(rows) {
  if (hessian_.rows() != hessian_.cols() || hessian_.rows() != minimum_.size() || minimum_.size() == 0)
    throw Error(ErrorCode::InvalidArgument, "quadratic energy needs a square Hessian matching the minimum");
  if (rows_ == 0) throw Error(ErrorCode::InvalidArgument, "quadratic energy needs at least one row");
}

QuadraticEnergy QuadraticEnergy::diagonal(std::span<const double> eigenvalues, std::size_t rows) {
  Eigen::VectorXd diag(static_cast<Eigen::Index>(eigenvalues.size()));
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) diag[static_cast<Eigen::Index>(i)] = eigenvalues[i];
  return QuadraticEnergy(diag.asDiagonal(), Eigen::VectorXd::Zero(diag.size()), rows);
}

void QuadraticEnergy::initialize(Rng& rng, std::span<double> w) const {
  std::normal_distribution<double> noise(0.0, 0.01);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = minimum_[static_cast<Eigen::Index>(i)] + noise(rng);
}

double QuadraticEnergy::value(std::span<const double> w, std::span<const std::size_t>) const {
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::VectorXd r = wv - minimum_;
  return 0.5 * r.dot(hessian_ * r);
}

void QuadraticEnergy::gradient(std::span<const double> w, std::span<const std::size_t>,
                               std::span<double> out) const {
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  Eigen::Map<Eigen::VectorXd> g(out.data(), static_cast<Eigen::Index>(out.size()));
  g = hessian_ * (wv - minimum_);
}

double QuadraticEnergy::per_example_prob(std::span<const double> w, std::size_t) const {
  return std::exp(-value(w, {}));
}

// ---------------------------------------------------------------------------
// Sampler and estimators

std::vector<double> sgld_step(std::span<const double> w, const DifferentiableEnergy& energy,
                              std::span<const std::size_t> rows, double n, const PriorKind& prior, double step,
                              Rng& rng, std::size_t step_index) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  std::vector<double> grad(w.size());
  energy.gradient(w, rows, grad);
  const double prior_precision =
      std::holds_alternative<GaussianPrior>(prior) ? std::get<GaussianPrior>(prior).epsilon : 0.0;
  const double noise_scale = std::sqrt(step);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> next(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double drift = n * grad[i] + prior_precision * w[i];
    next[i] = w[i] - 0.5 * step * drift + noise_scale * normal(rng);
    if (!std::isfinite(next[i]))
      throw Error(ErrorCode::NonFiniteState, "non-finite Langevin state at step " + std::to_string(step_index));
  }
  return next;
}

std::vector<double> sgld_sample_energies(std::span<const std::vector<double>> samples,
                                         const DifferentiableEnergy& energy, std::span<const std::size_t> heldout) {
  require_window(samples, heldout);
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& w : samples) {
    double sum = 0.0;
    for (std::size_t row : heldout) sum += 1.0 - energy.per_example_prob(w, row);
    out.push_back(sum / static_cast<double>(heldout.size()));
  }
  return out;
}

double sgld_avg_energy(std::span<const std::vector<double>> samples, const DifferentiableEnergy& energy,
                       std::span<const std::size_t> heldout) {
  const auto values = sgld_sample_energies(samples, energy, heldout);
  return mean_of(values);
}

CapacityEstimate sgld_capacity(std::span<const std::vector<double>> window_t,
                               std::span<const std::vector<double>> window_t_plus,
                               const DifferentiableEnergy& energy, std::span<const std::size_t> heldout, double n,
                               double delta_n) {
  if (!(n > 0.0) || !(delta_n > 0.0))
    throw Error(ErrorCode::InvalidArgument, "sample size and increment must be positive");
  const auto before = sgld_sample_energies(window_t, energy, heldout);
  const auto after = sgld_sample_energies(window_t_plus, energy, heldout);
  const double scale = n * n / delta_n;
  CapacityEstimate est;
  est.value = -scale * (mean_of(after) - mean_of(before));
  est.std_error = scale * std::sqrt(sample_variance(before) / static_cast<double>(before.size()) +
                                    sample_variance(after) / static_cast<double>(after.size()));
  est.at_n = static_cast<std::int64_t>(std::llround(n));
  est.method = CapacityMethod::Sgld;
  return est;
}

// ---------------------------------------------------------------------------
// Incremental protocol

namespace {

struct ChainTrace {
  bool failed = false;
  std::string failure;
  std::vector<std::vector<double>> energies;  // [schedule index][sample]
  std::vector<std::vector<double>> nll_sums;  // [schedule index][sample], summed 1 - p
  std::vector<std::size_t> heldout_counts;    // [schedule index]
  std::vector<CapacityEstimate> capacities;   // [transition]
};

void validate(const SgldConfig& c, const DifferentiableEnergy& energy) {
  if (!(c.step_size > 0.0) || !std::isfinite(c.step_size))
    throw Error(ErrorCode::ConfigError, "step size must be positive");
  if (c.chains < 2) throw Error(ErrorCode::ConfigError, "at least two chains are required");
  if (c.samples_per_window == 0) throw Error(ErrorCode::ConfigError, "samples per window must be positive");
  if (c.batch_size == 0) throw Error(ErrorCode::ConfigError, "batch size must be positive");
  if (c.n_schedule.empty()) throw Error(ErrorCode::ConfigError, "sample-size schedule is empty");
  for (std::size_t i = 1; i < c.n_schedule.size(); ++i)
    if (c.n_schedule[i] <= c.n_schedule[i - 1])
      throw Error(ErrorCode::ConfigError, "sample-size schedule must be strictly increasing");
  if (c.n_schedule.front() < c.chains)
    throw Error(ErrorCode::ConfigError, "smallest schedule size " + std::to_string(c.n_schedule.front()) +
                                            " leaves some of the " + std::to_string(c.chains) +
                                            " chains without a held-out row");
  if (c.n_schedule.back() > energy.rows())
    throw Error(ErrorCode::ScheduleExhaustsData, "schedule needs " + std::to_string(c.n_schedule.back()) +
                                                     " rows but only " + std::to_string(energy.rows()) +
                                                     " are available");
  if (const auto* g = std::get_if<GaussianPrior>(&c.prior); g && !(g->epsilon > 0.0))
    throw Error(ErrorCode::ConfigError, "prior precision must be positive");
}

ChainTrace run_chain(const DifferentiableEnergy& energy, const SgldConfig& config,
                     const std::vector<std::size_t>& order, std::size_t chain) {
  ChainTrace trace;
  Rng rng(derive_seed(config.seed, {stream::kChain, chain}));
  std::vector<double> w(energy.dim());
  energy.initialize(rng, w);

  std::vector<std::vector<double>> previous_window;
  std::vector<std::size_t> train, heldout, batch;
  std::size_t step_index = 0;
  const std::size_t k = config.chains;

  try {
    for (std::size_t s = 0; s < config.n_schedule.size(); ++s) {
      const std::size_t n = config.n_schedule[s];
      train.clear();
      heldout.clear();
      for (std::size_t pos = 0; pos < n; ++pos) (pos % k == chain ? heldout : train).push_back(order[pos]);

      const std::size_t steps_per_epoch = config.steps_per_epoch > 0
                                              ? config.steps_per_epoch
                                              : (train.size() + config.batch_size - 1) / config.batch_size;
      std::vector<std::size_t> shuffled = train;
      std::size_t cursor = shuffled.size();
      auto run_epoch = [&] {
        for (std::size_t t = 0; t < steps_per_epoch; ++t) {
          batch.clear();
          while (batch.size() < std::min(config.batch_size, shuffled.size())) {
            if (cursor == shuffled.size()) {
              std::shuffle(shuffled.begin(), shuffled.end(), rng);
              cursor = 0;
            }
            batch.push_back(shuffled[cursor++]);
          }
          w = sgld_step(w, energy, batch, static_cast<double>(n), config.prior, config.step_size, rng,
                        step_index++);
        }
      };

      const std::size_t warmup = config.equilibration_epochs + (s == 0 ? config.burn_in_epochs : 0);
      for (std::size_t e = 0; e < warmup; ++e) run_epoch();
      std::vector<std::vector<double>> window;
      for (std::size_t m = 0; m < config.samples_per_window; ++m) {
        run_epoch();
        window.push_back(w);
      }

      auto energies = sgld_sample_energies(window, energy, heldout);
      std::vector<double> sums;
      for (double e : energies) sums.push_back(e * static_cast<double>(heldout.size()));
      trace.energies.push_back(std::move(energies));
      trace.nll_sums.push_back(std::move(sums));
      trace.heldout_counts.push_back(heldout.size());
      if (s > 0) {
        const double prev_n = static_cast<double>(config.n_schedule[s - 1]);
        trace.capacities.push_back(
            sgld_capacity(previous_window, window, energy, heldout, prev_n, static_cast<double>(n) - prev_n));
      }
      previous_window = std::move(window);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFiniteState) throw;
    trace.failed = true;
    trace.failure = "chain " + std::to_string(chain) + ": " + e.what();
  }
  return trace;
}

}  // namespace

SgldResult run_incremental_protocol(const DifferentiableEnergy& energy, const SgldConfig& config,
                                    const std::string& dataset_id) {
  validate(config, energy);

  std::vector<std::size_t> order(energy.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng order_rng(derive_seed(config.seed, {stream::kRowOrder}));
  std::shuffle(order.begin(), order.end(), order_rng);

  std::vector<ChainTrace> traces(config.chains);
  parallel_for(config.chains, config.threads,
               [&](std::size_t c) { traces[c] = run_chain(energy, config, order, c); });

  SgldResult result;
  std::vector<std::size_t> alive;
  for (std::size_t c = 0; c < traces.size(); ++c) {
    if (traces[c].failed)
      result.chain_failures.push_back(traces[c].failure);
    else
      alive.push_back(c);
  }
  result.surviving_chains = alive.size();
  if (2 * alive.size() < config.chains)
    throw Error(ErrorCode::ChainFailure, std::to_string(config.chains - alive.size()) + " of " +
                                             std::to_string(config.chains) + " chains diverged");

  const double k = static_cast<double>(alive.size());
  result.curve.scale = kScaleProbComplement;
  for (std::size_t s = 0; s < config.n_schedule.size(); ++s) {
    std::vector<double> chain_means;
    for (std::size_t c : alive) chain_means.push_back(mean_of(traces[c].energies[s]));
    CurvePoint point;
    point.n = static_cast<std::int64_t>(config.n_schedule[s]);
    point.u_mean = mean_of(chain_means);
    if (alive.size() > 1) {
      point.u_stderr = std::sqrt(sample_variance(chain_means) / k);
    } else {
      const auto& e = traces[alive.front()].energies[s];
      point.u_stderr = std::sqrt(sample_variance(e) / static_cast<double>(e.size()));
    }
    point.record_count = alive.size() * config.samples_per_window;
    result.curve.points.push_back(point);

    for (std::size_t c : alive) {
      for (std::size_t m = 0; m < config.samples_per_window; ++m) {
        EnergyRecord r;
        r.dataset_id = dataset_id;
        r.sample_size = point.n;
        r.boot_index = static_cast<std::int64_t>(c);
        r.fold_index = 0;
        r.seed_index = static_cast<std::int64_t>(m);
        r.nll_sum = traces[c].nll_sums[s][m];
        r.heldout_count = static_cast<std::int64_t>(traces[c].heldout_counts[s]);
        result.records.push_back(std::move(r));
      }
    }
  }

  for (std::size_t t = 0; t + 1 < config.n_schedule.size(); ++t) {
    CapacityEstimate pooled;
    pooled.method = CapacityMethod::Sgld;
    pooled.at_n = static_cast<std::int64_t>(config.n_schedule[t]);
    double var = 0.0;
    for (std::size_t c : alive) {
      pooled.value += traces[c].capacities[t].value;
      var += traces[c].capacities[t].std_error * traces[c].capacities[t].std_error;
    }
    pooled.value /= k;
    pooled.std_error = std::sqrt(var) / k;
    result.capacities.push_back(pooled);
  }
  return result;
}

}  // namespace capmeter
