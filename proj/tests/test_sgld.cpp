#include <doctest.h>

#include <cmath>
#include <numeric>

#include "capmeter/errors.hpp"
#include "capmeter/learners.hpp"
#include "capmeter/sgld.hpp"
#include "capmeter/synthetic.hpp"

using namespace capmeter;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

LogPartition quadratic_logz(std::vector<double> l, double eps) {
  const HessianSpectrum s(std::move(l), eps);
  return [s](double n) { return quad_log_z(s, gaussian_prior(s), n); };
}

SgldConfig quadratic_config() {
  SgldConfig c;
  c.n_schedule = {5, 10, 20, 40};
  c.chains = 5;
  c.step_size = 1e-3;
  c.steps_per_epoch = 500;
  c.samples_per_window = 200;
  c.equilibration_epochs = 10;
  c.seed = 1;
  return c;
}

}  // namespace

TEST_CASE("sgld_step") {
  SUBCASE("flat energy gives pure Gaussian increments") {
    const std::vector<double> zero{0.0, 0.0};
    const auto energy = QuadraticEnergy::diagonal(zero, 4);
    const auto rows = iota_rows(4);
    Rng rng(3);
    const double step = 0.04;
    double sum = 0, sum_sq = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      const std::vector<double> w{1.0, -2.0};
      const auto next = sgld_step(w, energy, rows, 4, UniformPrior{}, step, rng, i);
      for (int k = 0; k < 2; ++k) {
        const double d = next[k] - w[k];
        sum += d;
        sum_sq += d * d;
      }
    }
    const double mean = sum / (2 * draws);
    CHECK(sum_sq / (2 * draws) - mean * mean == doctest::Approx(step).epsilon(0.05));
  }
  SUBCASE("stationary variance of a one-dimensional quadratic") {
    const std::vector<double> one{1.0};
    const auto energy = QuadraticEnergy::diagonal(one, 10);
    const auto rows = iota_rows(10);
    Rng rng(5);
    std::vector<double> w{0.0};
    double sum = 0, sum_sq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < 1'000'000; ++i) {
      w = sgld_step(w, energy, rows, 10, GaussianPrior{1.0}, 1e-3, rng, i);
      if (i >= 10000) {
        sum += w[0];
        sum_sq += w[0] * w[0];
        ++count;
      }
    }
    const double mean = sum / count;
    CHECK(sum_sq / count - mean * mean == doctest::Approx(1.0 / 11).epsilon(0.1));
  }
  SUBCASE("Gibbs covariance of a correlated quadratic") {
    Eigen::MatrixXd a(2, 2);
    a << 2.0, 0.6, 0.6, 1.0;
    const QuadraticEnergy energy(a, Eigen::Vector2d(0.5, -0.5), 20);
    const auto rows = iota_rows(20);
    Rng rng(7);
    std::vector<double> w{0.5, -0.5};
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    Eigen::Matrix2d outer = Eigen::Matrix2d::Zero();
    std::size_t count = 0;
    for (std::size_t i = 0; i < 600'000; ++i) {
      w = sgld_step(w, energy, rows, 20, GaussianPrior{1e-6}, 2e-3, rng, i);
      if (i >= 5000) {
        const Eigen::Vector2d v(w[0], w[1]);
        sum += v;
        outer += v * v.transpose();
        ++count;
      }
    }
    const Eigen::Vector2d mean = sum / double(count);
    const Eigen::Matrix2d cov = outer / double(count) - mean * mean.transpose();
    const Eigen::Matrix2d expected = (20 * a + 1e-6 * Eigen::Matrix2d::Identity()).inverse();
    CHECK((cov - expected).norm() / expected.norm() < 0.1);
  }
  SUBCASE("deterministic given the generator state") {
    const std::vector<double> l{1.0, 2.0};
    const auto energy = QuadraticEnergy::diagonal(l, 8);
    const auto rows = iota_rows(8);
    const std::vector<double> w{0.3, 0.1};
    Rng a(11), b(11);
    CHECK(sgld_step(w, energy, rows, 8, GaussianPrior{1.0}, 0.01, a) ==
          sgld_step(w, energy, rows, 8, GaussianPrior{1.0}, 0.01, b));
  }
  SUBCASE("divergence is reported with its step index") {
    const std::vector<double> l{1.0};
    const auto energy = QuadraticEnergy::diagonal(l, 8);
    const auto rows = iota_rows(8);
    Rng rng(1);
    try {
      sgld_step(std::vector<double>{1e308}, energy, rows, 8, GaussianPrior{1.0}, 10.0, rng, 42);
      FAIL("expected NonFiniteState");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteState);
      CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
  }
}

TEST_CASE("sgld energy estimators") {
  const std::vector<double> one{1.0};
  const auto energy = QuadraticEnergy::diagonal(one, 4);
  const auto rows = iota_rows(4);

  SUBCASE("certain predictions have zero energy") {
    const std::vector<std::vector<double>> at_min{{0.0}, {0.0}};
    CHECK(sgld_avg_energy(at_min, energy, rows) == 0.0);
  }
  SUBCASE("uniform predictor has energy one half") {
    const auto data = gen_synthetic(SyntheticConfig{3, 1.0, 20, 2, 1}, 12);
    const ModelEnergy model(std::make_shared<LinearModel>(3, output_spec_for(data)), data);
    const std::vector<std::vector<double>> zero{std::vector<double>(model.dim(), 0.0)};
    CHECK(sgld_avg_energy(zero, model, iota_rows(12)) == doctest::Approx(0.5));
  }
  SUBCASE("identical windows have zero capacity") {
    const std::vector<std::vector<double>> window{{0.3}, {-0.2}};
    const auto c = sgld_capacity(window, window, energy, rows, 10, 1);
    CHECK(c.value == 0.0);
    CHECK(c.method == CapacityMethod::Sgld);
  }
  SUBCASE("finite difference of U = 1/N") {
    const std::vector<std::vector<double>> at_10{{std::sqrt(-2 * std::log(0.9))}};
    const std::vector<std::vector<double>> at_11{{std::sqrt(-2 * std::log(1 - 1.0 / 11))}};
    CHECK(sgld_capacity(at_10, at_11, energy, rows, 10, 1).value == doctest::Approx(100.0 / 110).epsilon(1e-12));
  }
  SUBCASE("errors") {
    const std::vector<std::vector<double>> none;
    const std::vector<std::vector<double>> some{{0.0}};
    CHECK(code_of([&] { sgld_avg_energy(none, energy, rows); }) == ErrorCode::EmptyWindow);
    CHECK(code_of([&] { sgld_avg_energy(some, energy, {}); }) == ErrorCode::EmptyHeldout);
  }
  SUBCASE("model energy gradient matches finite differences") {
    const auto data = gen_synthetic(SyntheticConfig{3, 1.0, 20, 3, 1}, 15);
    const ModelEnergy model(std::make_shared<MlpModel>(3, 4, output_spec_for(data)), data);
    Rng rng(2);
    std::vector<double> w(model.dim()), g(model.dim());
    model.initialize(rng, w);
    const auto r = iota_rows(15);
    model.gradient(w, r, g);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double h = 1e-6, keep = w[k];
      w[k] = keep + h;
      const double hi = model.value(w, r);
      w[k] = keep - h;
      const double lo = model.value(w, r);
      w[k] = keep;
      CHECK(g[k] == doctest::Approx((hi - lo) / (2 * h)).epsilon(1e-4).scale(1e-6));
    }
  }
}

TEST_CASE("incremental protocol on the quadratic test energy") {
  const std::vector<double> l{1.0, 1.0};
  const auto energy = QuadraticEnergy::diagonal(l, 40);
  const auto config = quadratic_config();
  const auto result = run_incremental_protocol(energy, config, "quad");
  const auto logz = quadratic_logz(l, 1.0);

  REQUIRE(result.curve.points.size() == 4);
  CHECK(result.curve.scale == kScaleProbComplement);
  for (const auto& p : result.curve.points) {
    const double oracle = prob_complement_energy_from_logz(logz, double(p.n));
    CHECK(oracle == doctest::Approx(1.0 / (p.n + 2)).epsilon(1e-12));
    CHECK(p.u_mean == doctest::Approx(oracle).epsilon(0.05));
    CHECK(p.u_mean >= 0);
    CHECK(p.u_mean <= 1);
  }
  REQUIRE(result.capacities.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const double n1 = config.n_schedule[i], n2 = config.n_schedule[i + 1];
    const double oracle = -n1 * n1 *
                          (prob_complement_energy_from_logz(logz, n2) - prob_complement_energy_from_logz(logz, n1)) /
                          (n2 - n1);
    CHECK(std::abs(result.capacities[i].value - oracle) <= 0.15);
  }
  CHECK(result.surviving_chains == 5);
  CHECK(result.records.size() == 4 * 5 * 200);
  CHECK(result.records.front().heldout_count == 1);
  CHECK(result.records.back().heldout_count == 8);

  const auto again = run_incremental_protocol(energy, config, "quad");
  CHECK(again.records == result.records);
  auto threaded = config;
  threaded.threads = 3;
  CHECK(run_incremental_protocol(energy, threaded, "quad").records == result.records);
}

TEST_CASE("incremental protocol configuration") {
  const std::vector<double> l{1.0, 1.0};
  const auto energy = QuadraticEnergy::diagonal(l, 40);
  SUBCASE("each chain gains one row per ten added") {
    auto c = quadratic_config();
    c.chains = 10;
    c.n_schedule = {10, 20};
    c.samples_per_window = 2;
    c.equilibration_epochs = 1;
    c.steps_per_epoch = 10;
    const auto r = run_incremental_protocol(energy, c);
    for (const auto& rec : r.records) CHECK(rec.heldout_count == rec.sample_size / 10);
  }
  SUBCASE("rejected configurations") {
    auto c = quadratic_config();
    c.n_schedule = {5, 80};
    CHECK(code_of([&] { run_incremental_protocol(energy, c); }) == ErrorCode::ScheduleExhaustsData);
    c.n_schedule = {10, 10};
    CHECK(code_of([&] { run_incremental_protocol(energy, c); }) == ErrorCode::ConfigError);
    c.n_schedule = {5, 10};
    c.step_size = 0;
    CHECK(code_of([&] { run_incremental_protocol(energy, c); }) == ErrorCode::ConfigError);
    c.step_size = 1e-3;
    c.chains = 1;
    CHECK(code_of([&] { run_incremental_protocol(energy, c); }) == ErrorCode::ConfigError);
  }
  SUBCASE("logistic energy decreases across the schedule") {
    const auto data = gen_synthetic(SyntheticConfig{5, 1.0, 50, 2, 3}, 400);
    const ModelEnergy model(std::make_shared<LinearModel>(5, output_spec_for(data)), data);
    SgldConfig c;
    c.n_schedule = {50, 100, 200, 400};
    c.chains = 5;
    c.step_size = 1e-3;
    c.batch_size = 32;
    c.samples_per_window = 20;
    c.equilibration_epochs = 20;
    c.seed = 4;
    const auto r = run_incremental_protocol(model, c);
    for (std::size_t i = 1; i < r.curve.points.size(); ++i) {
      const auto& a = r.curve.points[i - 1];
      const auto& b = r.curve.points[i];
      CHECK(b.u_mean <= a.u_mean + std::hypot(a.u_stderr, b.u_stderr));
    }
  }
}
