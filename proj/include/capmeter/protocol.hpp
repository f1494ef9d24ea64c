#pragma once

// Bootstrap x fold x seed experiment protocol and the held-out energy estimators.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "capmeter/dataset.hpp"
#include "capmeter/learners.hpp"
#include "capmeter/records.hpp"

namespace capmeter {

struct ProtocolConfig {
  std::size_t n_boots = 4;
  std::size_t k_folds = 5;
  std::size_t m_seeds = 5;
  std::vector<std::size_t> n_grid;
  std::uint64_t master_seed = 0;
};

// `count` log-spaced integers in [lo, hi], rounded and deduplicated.
std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t count);

// 12 log-spaced sizes in [50, 5000].
std::vector<std::size_t> default_n_grid();

struct Job {
  std::size_t n = 0;
  std::size_t boot_index = 0;
  std::size_t fold_index = 0;
  std::size_t seed_index = 0;
  std::uint64_t rng_seed = 0;
  std::vector<std::size_t> train_rows;    // dataset row indices, bootstrap order
  std::vector<std::size_t> heldout_rows;

  bool operator==(const Job&) const = default;
};

// For every N: n_boots bootstrap draws (with replacement) of N rows, each split into
// k_folds folds of floor/ceil size by a seeded shuffle, and m_seeds jobs per fold.
std::vector<Job> plan_experiment(const ProtocolConfig& config, std::size_t dataset_size);

// Per-example NLL values are clamped to [0, kNllClamp] before summing.
inline constexpr double kNllClamp = 50.0;

struct ExecutionResult {
  std::vector<EnergyRecord> records;  // in job order
  std::size_t clamp_events = 0;
};

// Trains and evaluates every job. Jobs run on up to `threads` workers; results do not
// depend on the worker count. Failures surface as TrainingFailure naming the job.
ExecutionResult execute_plan(std::span<const Job> jobs, const Dataset& data, const Learner& learner,
                             const std::string& dataset_id, std::size_t threads = 1);

// Per N: each (boot, seed) replicate pools its folds as sum(nll) / sum(count); the
// point is the replicate mean with the standard error over replicates. Records must
// share one dataset_id.
EnergyCurve estimate_avg_energy(std::span<const EnergyRecord> records);

// As above, but raises EmptyGroup if any requested N has no records.
EnergyCurve estimate_avg_energy(std::span<const EnergyRecord> records, std::span<const std::size_t> requested_n);

// -1/N sum_i log p(y_i | x_i, D without i); N trainings.
double loocv_avg_energy(const Learner& learner, const Dataset& data, std::uint64_t seed = 0);

}  // namespace capmeter
