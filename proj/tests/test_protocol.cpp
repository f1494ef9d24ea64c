#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "capmeter/errors.hpp"
#include "capmeter/learners.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/records.hpp"
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

EnergyRecord rec(std::int64_t n, std::int64_t boot, std::int64_t fold, std::int64_t seed, double nll,
                 std::int64_t count) {
  return EnergyRecord{"d", n, boot, fold, seed, nll, count};
}

Dataset four_points(bool same_label_neighbours) {
  Dataset d;
  d.inputs = RowMatrix(4, 1);
  d.inputs << 0.0, 1.0, 10.0, 11.0;
  d.labels = same_label_neighbours ? std::vector<double>{0, 0, 1, 1} : std::vector<double>{0, 1, 0, 1};
  return d;
}

}  // namespace

TEST_CASE("log grids") {
  const auto g = default_n_grid();
  CHECK(g.size() == 12);
  CHECK(g.front() == 50);
  CHECK(g.back() == 5000);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
  CHECK(log_grid(3, 5, 10) == std::vector<std::size_t>{3, 4, 5});
}

TEST_CASE("plan_experiment") {
  SUBCASE("two folds of a four-row bootstrap") {
    ProtocolConfig c{1, 2, 1, {4}, 7};
    const auto jobs = plan_experiment(c, 4);
    REQUIRE(jobs.size() == 2);
    std::multiset<std::size_t> held;
    for (const auto& j : jobs) {
      CHECK(j.heldout_rows.size() == 2);
      CHECK(j.train_rows.size() == 2);
      held.insert(j.heldout_rows.begin(), j.heldout_rows.end());
    }
    std::multiset<std::size_t> boot(jobs[0].train_rows.begin(), jobs[0].train_rows.end());
    boot.insert(jobs[0].heldout_rows.begin(), jobs[0].heldout_rows.end());
    CHECK(held == boot);
  }
  SUBCASE("default replicate counts train 100 models per grid point") {
    ProtocolConfig c{4, 5, 5, {1000}, 0};
    CHECK(plan_experiment(c, 1000).size() == 100);
    CHECK(plan_experiment(c, 5000).size() == 100);
  }
  SUBCASE("deterministic and complete") {
    ProtocolConfig c{3, 4, 2, {10, 23, 57}, 42};
    const auto a = plan_experiment(c, 100);
    const auto b = plan_experiment(c, 100);
    CHECK(a == b);
    std::set<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> keys;
    for (const auto& j : a) {
      keys.insert({j.n, j.boot_index, j.fold_index, j.seed_index});
      CHECK(j.train_rows.size() + j.heldout_rows.size() == j.n);
      CHECK(j.heldout_rows.size() >= j.n / 4);
      CHECK(j.heldout_rows.size() <= (j.n + 3) / 4);
    }
    CHECK(keys.size() == a.size());
    CHECK(a.size() == 3 * 3 * 4 * 2);
    ProtocolConfig other = c;
    other.master_seed = 43;
    CHECK(plan_experiment(other, 100) != a);
  }
  SUBCASE("seeds differ across replicates") {
    ProtocolConfig c{2, 2, 2, {8}, 1};
    std::set<std::uint64_t> seeds;
    for (const auto& j : plan_experiment(c, 8)) seeds.insert(j.rng_seed);
    CHECK(seeds.size() == 8);
  }
  SUBCASE("preconditions") {
    CHECK(code_of([] { plan_experiment(ProtocolConfig{1, 2, 1, {10}, 0}, 5); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { plan_experiment(ProtocolConfig{1, 1, 1, {10}, 0}, 50); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { plan_experiment(ProtocolConfig{1, 5, 1, {4}, 0}, 50); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { plan_experiment(ProtocolConfig{1, 2, 1, {10, 10}, 0}, 50); }) == ErrorCode::ConfigError);
  }
}

TEST_CASE("estimate_avg_energy") {
  SUBCASE("uniform two-class predictor") {
    const std::vector<EnergyRecord> r{rec(10, 0, 0, 0, 5 * std::log(2.0), 5)};
    const auto c = estimate_avg_energy(r);
    REQUIRE(c.points.size() == 1);
    CHECK(c.points[0].u_mean == doctest::Approx(0.693147).epsilon(1e-6));
    CHECK(c.points[0].u_stderr == 0.0);
  }
  SUBCASE("folds pool by example count") {
    const std::vector<EnergyRecord> r{rec(10, 0, 0, 0, 1.0, 5), rec(10, 0, 1, 0, 2.0, 5)};
    CHECK(estimate_avg_energy(r).points[0].u_mean == doctest::Approx(0.3));
  }
  SUBCASE("standard error over replicates") {
    const std::vector<EnergyRecord> r{rec(10, 0, 0, 0, 1.0, 5), rec(10, 1, 0, 0, 2.0, 5)};
    const auto c = estimate_avg_energy(r);
    CHECK(c.points[0].u_mean == doctest::Approx(0.3));
    CHECK(c.points[0].u_stderr == doctest::Approx(0.1));
    CHECK(c.points[0].record_count == 2);
  }
  SUBCASE("scaling invariance and ordering") {
    std::vector<EnergyRecord> r{rec(20, 0, 0, 0, 3.0, 4), rec(20, 0, 1, 0, 1.0, 6), rec(10, 0, 0, 0, 2.0, 5)};
    const auto a = estimate_avg_energy(r);
    for (auto& x : r) {
      x.nll_sum *= 3;
      x.heldout_count *= 3;
    }
    const auto b = estimate_avg_energy(r);
    REQUIRE(a.points.size() == 2);
    CHECK(a.points[0].n == 10);
    CHECK(a.points[1].u_mean == doctest::Approx(b.points[1].u_mean).epsilon(1e-14));
  }
  SUBCASE("errors") {
    const std::vector<EnergyRecord> r{rec(10, 0, 0, 0, 1.0, 5)};
    const std::vector<std::size_t> want{10, 20};
    CHECK(code_of([&] { estimate_avg_energy(r, want); }) == ErrorCode::EmptyGroup);
    const std::vector<EnergyRecord> bad{rec(10, 0, 0, 0, NAN, 5)};
    CHECK(code_of([&] { estimate_avg_energy(bad); }) == ErrorCode::NonFinite);
  }
}

TEST_CASE("loocv_avg_energy") {
  const auto one_nn = knn_learner(KnnConfig{1, 1.0, 1.0});
  CHECK(loocv_avg_energy(*one_nn, four_points(true)) == doctest::Approx(0.405465).epsilon(1e-6));
  CHECK(loocv_avg_energy(*one_nn, four_points(false)) == doctest::Approx(1.098612).epsilon(1e-6));
  CHECK(loocv_avg_energy(*constant_learner(), four_points(true)) == doctest::Approx(std::log(2.0)));

  SUBCASE("k = N fold plan reproduces leave-one-out") {
    auto data = gen_synthetic(SyntheticConfig{3, 0.5, 20, 2, 4}, 12);
    const auto learner = knn_learner(KnnConfig{3, 1.0, 1.0});
    const double loo = loocv_avg_energy(*learner, data);
    std::vector<EnergyRecord> records;
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::vector<std::size_t> train;
      for (std::size_t j = 0; j < data.size(); ++j)
        if (j != i) train.push_back(j);
      Job job{data.size(), 0, i, 0, 0, train, {i}};
      auto r = execute_plan(std::span<const Job>(&job, 1), data, *learner, "d").records;
      records.insert(records.end(), r.begin(), r.end());
    }
    CHECK(estimate_avg_energy(records).points[0].u_mean == doctest::Approx(loo).epsilon(1e-12));
  }
}

TEST_CASE("execute_plan") {
  const auto data = gen_synthetic(SyntheticConfig{4, 1.0, 30, 2, 2}, 200);
  const auto learner = knn_learner(KnnConfig{5, 1.0, 1.0});
  const auto jobs = plan_experiment(ProtocolConfig{2, 3, 2, {30, 90}, 5}, data.size());
  const auto serial = execute_plan(jobs, data, *learner, "syn", 1);
  const auto threaded = execute_plan(jobs, data, *learner, "syn", 4);
  CHECK(serial.records == threaded.records);
  REQUIRE(serial.records.size() == jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(serial.records[i].sample_size == static_cast<std::int64_t>(jobs[i].n));
    CHECK(serial.records[i].heldout_count == static_cast<std::int64_t>(jobs[i].heldout_rows.size()));
    CHECK(serial.records[i].dataset_id == "syn");
  }
  const auto curve = estimate_avg_energy(serial.records);
  REQUIRE(curve.points.size() == 2);
  CHECK(curve.points[0].record_count == 12);
}

TEST_CASE("record files") {
  SUBCASE("round trip") {
    const std::vector<EnergyRecord> r{rec(10, 0, 0, 0, 1.5, 5), rec(10, 0, 1, 0, 2.25e-3, 5), rec(20, 1, 0, 2, 0.1, 4)};
    std::stringstream ss;
    write_records(ss, r, {"note"});
    const auto back = read_records(ss);
    CHECK(back.records == r);
    CHECK(back.comments == std::vector<std::string>{"note"});
  }
  SUBCASE("three lines") {
    std::istringstream in(std::string(kRecordHeader) + "\na,10,0,0,0,1.0,5\na,10,0,1,0,2e0,5\na,20,0,0,0,0.5,4\n");
    CHECK(read_records(in).records.size() == 3);
  }
  SUBCASE("zero heldout count") {
    std::istringstream in(std::string(kRecordHeader) + "\na,10,0,0,0,1.0,5\na,10,0,1,0,1.0,0\n");
    CHECK(code_of([&] { read_records(in); }) == ErrorCode::InvariantViolation);
  }
  SUBCASE("duplicate key") {
    std::istringstream in(std::string(kRecordHeader) + "\na,10,0,0,0,1.0,5\na,10,0,0,0,2.0,5\n");
    try {
      read_records(in);
      FAIL("expected DuplicateKey");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DuplicateKey);
      CHECK(std::string(e.what()).find("10") != std::string::npos);
    }
  }
  SUBCASE("malformed field") {
    std::istringstream in(std::string(kRecordHeader) + "\na,10,0,0,0,oops,5\n");
    try {
      read_records(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 6);
    }
  }
  SUBCASE("wrong header") {
    std::istringstream in("a,b,c\n");
    CHECK(code_of([&] { read_records(in); }) == ErrorCode::ParseError);
  }
  SUBCASE("scale comment") {
    std::istringstream in("# scale=probability-complement\n" + std::string(kRecordHeader) + "\na,10,0,0,0,1.0,5\n");
    CHECK(read_records(in).scale == kScaleProbComplement);
  }
  SUBCASE("curve round trip") {
    EnergyCurve c;
    c.points = {{10, 0.5, 0.01, 4}, {20, 0.4, 0.02, 4}};
    std::stringstream ss;
    write_curve(ss, c);
    CHECK(read_curve(ss).points == c.points);
  }
}
