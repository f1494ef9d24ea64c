#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/estimators.hpp"
#include "capmeter/oracle.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/records.hpp"
#include "capmeter/sgld.hpp"
#include "capmeter/statistics.hpp"

namespace fs = std::filesystem;
using namespace capmeter;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... values) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, values...);
  return buf;
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto p = fs::temp_directory_path() / ("capmeter-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

void run_cli_or_throw(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (code != 0) throw std::runtime_error("capmeter " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Records without the manifest comments, which name the output path and the time.
std::string record_body(const fs::path& path) {
  const auto text = slurp(path);
  return text.substr(text.find(kRecordHeader));
}

struct ProtocolRun {
  EnergyCurve curve;
  std::string records;
};

ProtocolRun run_protocol(const std::string& name, std::vector<std::string> flags) {
  const auto out = (work_dir() / (name + ".records")).string();
  std::vector<std::string> args{"run"};
  args.insert(args.end(), flags.begin(), flags.end());
  args.insert(args.end(), {"--out", out});
  run_cli_or_throw(args);
  return {load_curve_or_records(out), record_body(out)};
}

std::vector<std::string> criterion2_flags() {
  return {"--synthetic", "d=20,kappa=0", "--learner", "logistic", "--l2", "0", "--prior-precision", "1",
          "--n-grid", "50:5000:12log", "--boots", "2", "--folds", "5", "--seeds", "3", "--seed", "1"};
}

std::vector<std::string> criterion8_flags(const std::string& kappa) {
  return {"--synthetic", "d=20,kappa=" + kappa, "--learner", "mlp", "--hidden", "16",
          "--n-grid", "50:2000:10log", "--boots", "2", "--folds", "5", "--seeds", "3", "--seed", "1"};
}

SgldConfig criterion6_config() {
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

SgldResult run_criterion6() {
  const std::vector<double> l{1.0, 1.0};
  const auto energy = QuadraticEnergy::diagonal(l, 40);
  return run_incremental_protocol(energy, criterion6_config(), "quadratic-test");
}

// Shared between criteria that reuse a run and the determinism rerun.
struct Cache {
  std::optional<ProtocolRun> c2;
  std::optional<SigmoidCapacityModel> c2_fit;
  std::optional<SgldResult> c6;
  std::vector<ProtocolRun> c8;
  std::vector<double> c8_capacity;
} cache;

Verdict criterion1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240101);
  std::uniform_int_distribution<int> dim(1, 20);
  std::uniform_real_distribution<double> log_l(std::log(1e-3), std::log(10.0));
  std::uniform_real_distribution<double> log_e(std::log(1e-2), 0.0);
  double worst = 0;
  for (int s = 0; s < 50; ++s) {
    std::vector<double> l(dim(rng));
    for (auto& x : l) x = std::exp(log_l(rng));
    const HessianSpectrum spec(l, std::exp(log_e(rng)));
    const LogPartition logz = [&](double n) { return quad_log_z(spec, gaussian_prior(spec), n); };
    for (double n : {10.0, 100.0, 1000.0}) {
      const double exact = quad_capacity_exact(spec, n);
      worst = std::max(worst, std::abs(capacity_from_logz(logz, n) - exact) / exact);
    }
  }
  const double t = seconds_since(start);
  return {worst <= 0.02 && t < 1.0, fmt("max relative error %.4f over 150 checks, %.3f s", worst, t)};
}

Verdict criterion2() {
  const auto start = Clock::now();
  cache.c2 = run_protocol("c2", criterion2_flags());
  cache.c2_fit = fit_sigmoid_capacity(cache.c2->curve);
  const double c = capacity_from_sigmoid(*cache.c2_fit, cache.c2->curve.n_max()).value;
  const double half_p = 21 / 2.0;
  return {c >= 0.5 * half_p && c <= 1.5 * half_p,
          fmt("sigmoid C(5000) = %.3f, accepted [%.3f, %.3f], %.0f s", c, 0.5 * half_p, 1.5 * half_p,
              seconds_since(start))};
}

Verdict criterion3() {
  SigmoidCapacityModel truth;
  truth.a = 100;
  truth.b = 20;
  truth.c = 3;
  truth.u_inf = 0.1;
  const double n_star = std::exp(truth.b / truth.c);
  int ok = 0;
  std::vector<double> recovered;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, 0.005);
    EnergyCurve curve;
    for (auto n : log_grid(100, 100000, 15))
      curve.points.push_back({static_cast<std::int64_t>(n), energy_from_sigmoid(truth, n) + noise(rng), 0.005, 1});
    try {
      const auto fit = fit_sigmoid_capacity(curve);
      const double ns = freezing_threshold(fit).n_star;
      recovered.push_back(fit.a);
      if (std::abs(fit.a - truth.a) <= 0.05 * truth.a && std::abs(ns - n_star) <= 0.15 * n_star) ++ok;
    } catch (const Error&) {
    }
  }
  double mean = 0, var = 0;
  for (double a : recovered) mean += a;
  mean /= recovered.size();
  for (double a : recovered) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / (recovered.size() - 1));
  return {ok >= 18, fmt("%d/20 seeds within tolerance; recovered a has mean %.2f and spread %.2f across seeds", ok,
                        mean, sd)};
}

Verdict criterion4() {
  if (!cache.c2) return {false, "criterion 2 run unavailable"};
  struct Case {
    std::string name;
    EnergyCurve curve;
  };
  std::vector<Case> cases{{"criterion-2 logistic", cache.c2->curve}};
  const auto synthetic = [](std::function<double(double)> u, double se, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0, se);
    EnergyCurve c;
    for (auto n : log_grid(50, 5000, 15))
      c.points.push_back({static_cast<std::int64_t>(n), u(double(n)) + noise(rng), se, 1});
    return c;
  };
  SigmoidCapacityModel s1;
  s1.a = 40;
  s1.b = 12;
  s1.c = 2;
  s1.u_inf = 0.2;
  SigmoidCapacityModel s2;
  s2.a = 8;
  s2.b = 6;
  s2.c = 1.5;
  s2.u_inf = 0.3;
  cases.push_back({"constant capacity 25", synthetic([](double n) { return 0.1 + 25 / n; }, 1e-3, 1)});
  cases.push_back({"sigmoid a=40", synthetic([&](double n) { return energy_from_sigmoid(s1, n); }, 1e-3, 2)});
  cases.push_back({"sigmoid a=8", synthetic([&](double n) { return energy_from_sigmoid(s2, n); }, 5e-4, 3)});

  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const double n = c.curve.n_max();
    const auto sig = capacity_from_sigmoid(fit_sigmoid_capacity(c.curve), n);
    const auto poly = capacity_from_polynomial(fit_monotone_polynomial(c.curve), n);
    const double tol = std::max(sig.std_error, poly.std_error);
    const bool ok = std::abs(sig.value - poly.value) <= tol;
    pass = pass && ok;
    detail += fmt("%s%s: sigmoid %.2f vs polynomial %.2f (tol %.2f)%s", detail.empty() ? "" : "; ", c.name.c_str(),
                  sig.value, poly.value, tol, ok ? "" : " MISMATCH");
  }
  return {pass, detail};
}

Verdict criterion5() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_real_distribution<double> log_mag(std::log(1e-6), std::log(1e2));
  std::uniform_real_distribution<double> log_e(std::log(1e-4), std::log(10.0));
  std::uniform_int_distribution<std::int64_t> size(2, 100000);
  std::bernoulli_distribution negative(0.1);
  int mismatches = 0;
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> l(dim(rng));
    for (auto& x : l) x = (negative(rng) ? -1 : 1) * std::exp(log_mag(rng));
    const HessianSpectrum spec(l, std::exp(log_e(rng)));
    const auto n = size(rng);
    std::size_t count = 0;
    for (double x : l)
      if (std::abs(x) >= spec.epsilon() / (2.0 * (n - 1))) ++count;
    if (pacbayes_effective_dim(spec, n) != count) ++mismatches;
  }
  return {mismatches == 0, fmt("%d mismatches over 1000 spectra", mismatches)};
}

Verdict criterion6() {
  const auto start = Clock::now();
  cache.c6 = run_criterion6();
  const double t = seconds_since(start);
  const HessianSpectrum spec({1.0, 1.0}, 1.0);
  const LogPartition logz = [&](double n) { return quad_log_z(spec, gaussian_prior(spec), n); };
  const auto& schedule = criterion6_config().n_schedule;
  double worst_u = 0, worst_c = 0;
  for (const auto& p : cache.c6->curve.points) {
    const double oracle = prob_complement_energy_from_logz(logz, double(p.n));
    worst_u = std::max(worst_u, std::abs(p.u_mean - oracle) / oracle);
  }
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    const double n1 = schedule[i], n2 = schedule[i + 1];
    const double oracle = -n1 * n1 *
                          (prob_complement_energy_from_logz(logz, n2) - prob_complement_energy_from_logz(logz, n1)) /
                          (n2 - n1);
    worst_c = std::max(worst_c, std::abs(cache.c6->capacities[i].value - oracle));
  }
  return {worst_u <= 0.05 && worst_c <= 0.15 && t < 60,
          fmt("max relative U error %.4f, max capacity error %.3f, %.2f s", worst_u, worst_c, t)};
}

Verdict criterion7() {
  bool pass = true;
  std::string detail;
  for (auto [dim, eps] : {std::pair<std::size_t, double>{1, 0.01}, {2, 0.01}, {4, 0.05}}) {
    RlctOptions opts;
    opts.dim = dim;
    opts.eps = eps;
    opts.n_samples = 1'000'000;
    opts.seed = 7;
    const WeightEnergy energy = [](std::span<const double> w) {
      double s = 0;
      for (double x : w) s += x * x;
      return 0.5 * s;
    };
    const auto est = rlct_volume_estimate(energy, uniform_box_sampler(-1, 1), opts);
    const double target = dim / 2.0;
    const bool ok = std::abs(est.value - target) <= 0.1 * target;
    pass = pass && ok;
    detail += fmt("%sp=%zu: %.3f (target %.1f)", detail.empty() ? "" : ", ", dim, est.value, target);
  }
  return {pass, detail};
}

Verdict criterion8() {
  const auto start = Clock::now();
  const std::vector<std::string> kappas{"0.1", "1", "10"};
  std::vector<double> caps, losses;
  for (const auto& k : kappas) {
    cache.c8.push_back(run_protocol("c8_" + k, criterion8_flags(k)));
    const auto& curve = cache.c8.back().curve;
    caps.push_back(capacity_from_sigmoid(fit_sigmoid_capacity(curve), curve.n_max()).value);
    losses.push_back(curve.points.back().u_mean);
  }
  cache.c8_capacity = caps;
  const bool decreasing = caps[0] > caps[1] && caps[1] > caps[2];
  const double tau = kendall_tau(caps, losses);
  return {decreasing && tau > 0,
          fmt("C(2000) = %.2f, %.2f, %.2f; U(2000) = %.4f, %.4f, %.4f; tau = %.3f; %.0f s", caps[0], caps[1], caps[2],
              losses[0], losses[1], losses[2], tau, seconds_since(start))};
}

Verdict criterion9() {
  const auto start = Clock::now();
  std::vector<std::pair<double, double>> points;
  std::string values;
  for (int width : {4, 8, 16, 32, 64}) {
    const auto run = run_protocol("c9_" + std::to_string(width),
                                  {"--synthetic", "d=20,kappa=1", "--learner", "mlp", "--hidden",
                                   std::to_string(width), "--n-grid", "50,79,126,200,316,500,800,1270,2000", "--boots",
                                   "2", "--folds", "5", "--seeds", "3", "--seed", "1"});
    const auto fit = fit_sigmoid_capacity(run.curve);
    double loss = NAN;
    for (const auto& p : run.curve.points)
      if (p.n == 500) loss = p.u_mean;
    points.push_back({capacity_from_sigmoid(fit, 500).value, loss});
    values += fmt("%s%d:(%.2f, %.4f)", values.empty() ? "" : " ", width, points.back().first, loss);
  }
  const auto reg = capacity_loss_regression(points);
  return {reg.slope > 0 && reg.p_value < 0.05,
          fmt("slope %.5f, p = %.4f; width:(C(500), U(500)) %s; %.0f s", reg.slope, reg.p_value, values.c_str(),
              seconds_since(start))};
}

Verdict criterion10() {
  if (!cache.c2 || !cache.c6 || cache.c8.size() != 3) return {false, "first runs unavailable"};
  std::vector<std::string> diffs;
  const auto c2 = run_protocol("c2_rerun", criterion2_flags());
  if (c2.records != cache.c2->records) diffs.push_back("criterion 2 records");
  const auto fit2 = fit_sigmoid_capacity(c2.curve);
  if (fit2.a != cache.c2_fit->a || fit2.b != cache.c2_fit->b || fit2.c != cache.c2_fit->c ||
      fit2.u_inf != cache.c2_fit->u_inf)
    diffs.push_back("criterion 2 fit");

  const auto c6 = run_criterion6();
  if (c6.records != cache.c6->records) diffs.push_back("criterion 6 records");
  for (std::size_t i = 0; i < c6.capacities.size(); ++i)
    if (c6.capacities[i].value != cache.c6->capacities[i].value ||
        c6.capacities[i].std_error != cache.c6->capacities[i].std_error)
      diffs.push_back("criterion 6 capacities");

  const std::vector<std::string> kappas{"0.1", "1", "10"};
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    const auto run = run_protocol("c8_rerun_" + kappas[i], criterion8_flags(kappas[i]));
    if (run.records != cache.c8[i].records) diffs.push_back("criterion 8 records at kappa " + kappas[i]);
    if (capacity_from_sigmoid(fit_sigmoid_capacity(run.curve), run.curve.n_max()).value != cache.c8_capacity[i])
      diffs.push_back("criterion 8 capacity at kappa " + kappas[i]);
  }
  std::string detail = diffs.empty() ? "records and fitted numbers identical on rerun" : "differences in:";
  for (const auto& d : diffs) detail += " " + d;
  return {diffs.empty(), detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"quadratic oracle self-consistency", criterion1},
      {"regular-model capacity near p/2", criterion2},
      {"sigmoid fit recovery", criterion3},
      {"polynomial and sigmoid agreement", criterion4},
      {"PAC-Bayes dimension brute force", criterion5},
      {"SGLD against the quadratic oracle", criterion6},
      {"RLCT volume estimator", criterion7},
      {"kappa ordering", criterion8},
      {"capacity-loss regression sign", criterion9},
      {"determinism", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first
              << "): " << v.detail << std::endl;
  }
  fs::remove_all(work_dir());
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
