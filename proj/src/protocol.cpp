#include "capmeter/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "capmeter/errors.hpp"
#include "capmeter/parallel.hpp"
#include "capmeter/rng.hpp"

namespace capmeter {

namespace {

// Clamp of one per-example NLL. Gaussian densities can exceed one, so regression
// values keep their sign and only the upper bound applies.
double clamp_nll(double nll, Task task, std::size_t& events) {
  const double lo = task == Task::Regression ? -kNllClamp : 0.0;
  if (std::isnan(nll) || nll > kNllClamp) {
    ++events;
    return kNllClamp;
  }
  if (nll < lo) {
    ++events;
    return lo;
  }
  return nll;
}

std::string job_label(const Job& job) {
  std::ostringstream s;
  s << "job (N=" << job.n << ", boot=" << job.boot_index << ", fold=" << job.fold_index
    << ", seed=" << job.seed_index << ")";
  return s.str();
}

}  // namespace

std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t count) {
  if (lo < 1 || hi < lo || count < 1) throw Error(ErrorCode::ConfigError, "log grid needs 1 <= lo <= hi and count >= 1");
  std::vector<std::size_t> grid;
  if (count == 1) return {lo};
  const double a = std::log(static_cast<double>(lo));
  const double b = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    const auto v = static_cast<std::size_t>(std::llround(std::exp(a + t * (b - a))));
    if (grid.empty() || v > grid.back()) grid.push_back(v);
  }
  return grid;
}

std::vector<std::size_t> default_n_grid() { return log_grid(50, 5000, 12); }

std::vector<Job> plan_experiment(const ProtocolConfig& config, std::size_t dataset_size) {
  if (config.k_folds < 2) throw Error(ErrorCode::ConfigError, "k_folds must be at least 2");
  if (config.n_boots < 1 || config.m_seeds < 1)
    throw Error(ErrorCode::ConfigError, "n_boots and m_seeds must be at least 1");
  if (config.n_grid.empty()) throw Error(ErrorCode::ConfigError, "empty N grid");
  if (dataset_size < config.k_folds)
    throw Error(ErrorCode::ConfigError, "dataset of " + std::to_string(dataset_size) + " rows is smaller than k_folds");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    const std::size_t n = config.n_grid[i];
    if (i > 0 && n <= config.n_grid[i - 1]) throw Error(ErrorCode::ConfigError, "N grid must be strictly increasing");
    if (n < config.k_folds || n < 2)
      throw Error(ErrorCode::ConfigError, "N=" + std::to_string(n) + " is smaller than k_folds");
  }
  if (config.n_grid.back() > dataset_size)
    throw Error(ErrorCode::ConfigError, "max N " + std::to_string(config.n_grid.back()) + " exceeds dataset size " +
                                            std::to_string(dataset_size));

  const std::size_t k = config.k_folds;
  std::vector<Job> jobs;
  jobs.reserve(config.n_grid.size() * config.n_boots * k * config.m_seeds);

  for (const std::size_t n : config.n_grid) {
    for (std::size_t boot = 0; boot < config.n_boots; ++boot) {
      Rng draw_rng(derive_seed(config.master_seed, {stream::kBootstrap, n, boot}));
      std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
      std::vector<std::size_t> sample(n);
      for (auto& s : sample) s = pick(draw_rng);

      Rng shuffle_rng(derive_seed(config.master_seed, {stream::kFoldShuffle, n, boot}));
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), shuffle_rng);

      // Fold sizes differ by at most one; the first n % k folds take the extra row.
      const std::size_t base = n / k;
      const std::size_t extra = n % k;
      std::vector<std::size_t> fold_of(n);
      std::size_t offset = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t size = base + (j < extra ? 1 : 0);
        for (std::size_t t = 0; t < size; ++t) fold_of[perm[offset + t]] = j;
        offset += size;
      }

      for (std::size_t fold = 0; fold < k; ++fold) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> heldout;
        train.reserve(n - base);
        heldout.reserve(base + 1);
        for (std::size_t pos = 0; pos < n; ++pos) (fold_of[pos] == fold ? heldout : train).push_back(sample[pos]);

        for (std::size_t seed = 0; seed < config.m_seeds; ++seed) {
          Job job;
          job.n = n;
          job.boot_index = boot;
          job.fold_index = fold;
          job.seed_index = seed;
          job.rng_seed = derive_seed(config.master_seed, {stream::kTraining, n, boot, fold, seed});
          job.train_rows = train;
          job.heldout_rows = heldout;
          jobs.push_back(std::move(job));
        }
      }
    }
  }
  return jobs;
}

ExecutionResult execute_plan(std::span<const Job> jobs, const Dataset& data, const Learner& learner,
                             const std::string& dataset_id, std::size_t threads) {
  std::vector<EnergyRecord> records(jobs.size());
  std::vector<std::size_t> clamps(jobs.size(), 0);

  parallel_for(jobs.size(), threads, [&](std::size_t idx) {
    const Job& job = jobs[idx];
    std::unique_ptr<PredictiveModel> model;
    try {
      model = learner.fit(data, job.train_rows, job.rng_seed);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::TrainingFailure, job_label(job) + ": " + e.what());
    }
    double sum = 0.0;
    for (std::size_t row : job.heldout_rows)
      sum += clamp_nll(-model->log_prob(data.row(row), data.labels[row]), data.task, clamps[idx]);

    EnergyRecord& r = records[idx];
    r.dataset_id = dataset_id;
    r.sample_size = static_cast<std::int64_t>(job.n);
    r.boot_index = static_cast<std::int64_t>(job.boot_index);
    r.fold_index = static_cast<std::int64_t>(job.fold_index);
    r.seed_index = static_cast<std::int64_t>(job.seed_index);
    r.nll_sum = sum;
    r.heldout_count = static_cast<std::int64_t>(job.heldout_rows.size());
  });

  return {std::move(records), std::accumulate(clamps.begin(), clamps.end(), std::size_t{0})};
}

EnergyCurve estimate_avg_energy(std::span<const EnergyRecord> records) {
  struct Pool {
    double nll = 0.0;
    std::int64_t count = 0;
  };
  struct Group {
    std::map<std::pair<std::int64_t, std::int64_t>, Pool> replicates;  // (boot, seed)
    std::size_t records = 0;
  };

  std::map<std::int64_t, Group> groups;
  for (const auto& r : records) {
    if (!std::isfinite(r.nll_sum))
      throw Error(ErrorCode::NonFinite, "non-finite nll_sum at N=" + std::to_string(r.sample_size));
    if (r.heldout_count < 1) throw Error(ErrorCode::InvariantViolation, "heldout_count must be >= 1");
    if (r.dataset_id != records.front().dataset_id)
      throw Error(ErrorCode::ConfigError, "records mix dataset ids '" + records.front().dataset_id + "' and '" +
                                              r.dataset_id + "'");
    auto& g = groups[r.sample_size];
    auto& pool = g.replicates[{r.boot_index, r.seed_index}];
    pool.nll += r.nll_sum;
    pool.count += r.heldout_count;
    ++g.records;
  }

  EnergyCurve curve;
  for (const auto& [n, g] : groups) {
    std::vector<double> means;
    means.reserve(g.replicates.size());
    for (const auto& [key, pool] : g.replicates) means.push_back(pool.nll / static_cast<double>(pool.count));
    const double r = static_cast<double>(means.size());
    const double mean = std::accumulate(means.begin(), means.end(), 0.0) / r;
    double se = 0.0;
    if (means.size() > 1) {
      double ss = 0.0;
      for (double m : means) ss += (m - mean) * (m - mean);
      se = std::sqrt(ss / (r - 1.0) / r);
    }
    curve.points.push_back({n, mean, se, g.records});
  }
  return curve;
}

EnergyCurve estimate_avg_energy(std::span<const EnergyRecord> records, std::span<const std::size_t> requested_n) {
  auto curve = estimate_avg_energy(records);
  for (std::size_t n : requested_n) {
    const bool found = std::any_of(curve.points.begin(), curve.points.end(),
                                   [&](const CurvePoint& p) { return p.n == static_cast<std::int64_t>(n); });
    if (!found) throw Error(ErrorCode::EmptyGroup, "no records for N=" + std::to_string(n));
  }
  return curve;
}

double loocv_avg_energy(const Learner& learner, const Dataset& data, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "LOOCV needs at least two rows");
  std::vector<std::size_t> rows;
  rows.reserve(n - 1);
  std::size_t clamps = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rows.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) rows.push_back(j);
    std::unique_ptr<PredictiveModel> model;
    try {
      model = learner.fit(data, rows, seed);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::TrainingFailure, "leaving out row " + std::to_string(i) + ": " + e.what());
    }
    total += clamp_nll(-model->log_prob(data.row(i), data.labels[i]), data.task, clamps);
  }
  return total / static_cast<double>(n);
}

}  // namespace capmeter
