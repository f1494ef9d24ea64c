#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/estimators.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/records.hpp"
#include "capmeter/report.hpp"

namespace fs = std::filesystem;
using namespace capmeter;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("capmeter-cli-" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Value of the first "key = value" line.
std::string field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(in, line))
    if (line.starts_with(prefix)) return line.substr(prefix.size());
  return {};
}

void write_curve_file(const std::string& path, const std::function<double(double)>& u, std::size_t lo, std::size_t hi,
                      std::size_t count, double se) {
  EnergyCurve c;
  for (auto n : log_grid(lo, hi, count)) c.points.push_back({static_cast<std::int64_t>(n), u(double(n)), se, 1});
  std::ofstream out(path);
  write_curve(out, c);
}

}  // namespace

TEST_CASE("argument helpers") {
  CHECK(cli::parse_n_grid("50:5000:12log") == default_n_grid());
  CHECK(cli::parse_n_grid("5,10,20") == std::vector<std::size_t>{5, 10, 20});
  CHECK_THROWS_AS(cli::parse_n_grid("10,5"), Error);
  CHECK_THROWS_AS(cli::parse_n_grid("a:b:c"), Error);

  std::size_t rows = 0;
  const auto s = cli::parse_synthetic_spec("d=20,kappa=1,seed=3,rows=500", &rows);
  CHECK(s.d == 20);
  CHECK(s.kappa == 1.0);
  CHECK(s.seed == 3);
  CHECK(s.teacher_hidden == 1000);
  CHECK(rows == 500);
  CHECK_THROWS_AS(cli::parse_synthetic_spec("d=20,bogus=1"), Error);
  CHECK_THROWS_AS(cli::parse_key_values("a=1,a=2"), Error);

  CHECK(cli::format_percent(609, 78902) == "0.77%");
  CHECK(cli::strip_timestamps("# command: x\n# timestamp: 2020\nrow\n") == "# command: x\nrow\n");
}

TEST_CASE("run command") {
  TempDir dir;
  const std::vector<std::string> args{"run", "--synthetic", "d=5,kappa=1", "--learner", "knn", "--n-grid",
                                      "50:400:4log", "--boots", "2", "--folds", "5", "--seeds", "3", "--seed", "7",
                                      "--out", dir / "a.records"};
  const auto first = run(args);
  REQUIRE(first.code == 0);
  const auto records = ingest_records(dir / "a.records");
  CHECK(records.records.size() == 4 * 30);
  const auto curve = estimate_avg_energy(records.records);
  for (const auto& p : curve.points) CHECK(p.record_count == 30);
  CHECK(fs::exists(dir / "a.curve"));

  auto again = args;
  again.back() = dir / "b.records";
  REQUIRE(run(again).code == 0);
  std::string a = cli::strip_timestamps(slurp(dir / "a.records"));
  std::string b = cli::strip_timestamps(slurp(dir / "b.records"));
  const auto drop_command = [](std::string text) {
    return text.substr(text.find('\n') + 1);
  };
  CHECK(drop_command(a) == drop_command(b));

  auto threaded = args;
  threaded.back() = dir / "c.records";
  threaded.insert(threaded.end(), {"--jobs", "3"});
  REQUIRE(run(threaded).code == 0);
  CHECK(ingest_records(dir / "c.records").records == records.records);

  const auto missing = run({"run", "--synthetic", "d=5,kappa=1", "--out", dir / "x.records"});
  CHECK(missing.code == cli::kExitConfig);
  CHECK(missing.err.find("--learner") != std::string::npos);
}

TEST_CASE("fit command") {
  TempDir dir;
  SigmoidCapacityModel truth;
  truth.a = 100;
  truth.b = 20;
  truth.c = 3;
  truth.u_inf = 0.1;
  write_curve_file(dir / "bench.curve", [&](double n) { return energy_from_sigmoid(truth, n); }, 100, 100000, 15,
                   1e-4);
  const auto fit = run({"fit", dir / "bench.curve", "--params", "78902", "--plot", dir / "bench.svg"});
  REQUIRE(fit.code == 0);
  CHECK(std::stod(field(fit.out, "sigmoid.a")) == doctest::Approx(100).epsilon(0.05));
  CHECK(fs::exists(dir / "bench.report"));
  CHECK(fs::exists(dir / "bench.json"));
  const auto svg = slurp(dir / "bench.svg");
  CHECK(svg.starts_with("<svg"));
  CHECK(svg.find("timestamp") == std::string::npos);

  write_curve_file(dir / "table.curve", [](double n) { return 0.2 + 609 / n; }, 200, 50000, 10, 1e-4);
  const auto pct = run({"fit", dir / "table.curve", "--method", "sigmoid", "--params", "78902"});
  REQUIRE(pct.code == 0);
  const double cap = std::stod(field(pct.out, "sigmoid.capacity_at_n_max"));
  CHECK(cap == doctest::Approx(609).epsilon(0.01));
  CHECK(field(pct.out, "sigmoid.capacity_per_param") == cli::format_percent(cap, 78902));
  CHECK(field(pct.out, "sigmoid.capacity_per_param") == "0.77%");

  write_curve_file(dir / "short.curve", [](double n) { return 1 / n; }, 50, 500, 3, 1e-3);
  const auto short_fit = run({"fit", dir / "short.curve"});
  CHECK(short_fit.code == cli::kExitFit);
  CHECK(short_fit.err.find("DegenerateCurve") != std::string::npos);

  CHECK(run({"fit", dir / "missing.curve"}).code == cli::kExitConfig);
}

TEST_CASE("oracle command") {
  const auto exact = run({"oracle", "--lambda", "1,1", "--eps", "1", "--n", "1000000000", "--exact"});
  REQUIRE(exact.code == 0);
  CHECK(std::stod(field(exact.out, "capacity_exact(N=1000000000)")) == doctest::Approx(1.0).epsilon(1e-8));

  const auto dim = run({"oracle", "--lambda", "1,0.1,0.001", "--eps", "0.2", "--dim-at", "101"});
  REQUIRE(dim.code == 0);
  CHECK(field(dim.out, "effective_dim(N=101)") == "3");

  TempDir dir;
  std::ofstream(dir / "bad.spectrum") << "1.0\n2.0\n";
  CHECK(run({"oracle", "--spectrum", dir / "bad.spectrum"}).code == cli::kExitConfig);
  std::ofstream(dir / "good.spectrum") << "# epsilon=1\n1.0\n1.0\n";
  const auto good = run({"oracle", "--spectrum", dir / "good.spectrum", "--n", "1", "--exact"});
  REQUIRE(good.code == 0);
  CHECK(std::stod(field(good.out, "capacity_exact(N=1)")) == doctest::Approx(0.25));
}

TEST_CASE("compare command") {
  TempDir dir;
  const auto fit = [&](const std::string& name, double cap, double floor) {
    write_curve_file(dir / (name + ".curve"), [=](double n) { return floor + cap / n; }, 50, 5000, 8, 1e-4);
    REQUIRE(run({"fit", dir / (name + ".curve"), "--label", name}).code == 0);
    return dir / (name + ".report");
  };
  const auto small = fit("small", 5, 0.1);
  const auto large = fit("large", 50, 0.3);
  const auto ordered = run({"compare", small, large});
  REQUIRE(ordered.code == 0);
  CHECK(std::stod(field(ordered.out, "kendall_tau(N=5000)")) == doctest::Approx(1.0));
  CHECK(ordered.err.find("regression") != std::string::npos);

  const auto inverted = fit("inverted", 50, 0.0);
  const auto reversed = run({"compare", small, inverted});
  REQUIRE(reversed.code == 0);
  CHECK(std::stod(field(reversed.out, "kendall_tau(N=5000)")) == doctest::Approx(-1.0));

  const auto middle = fit("middle", 20, 0.2);
  const auto three = run({"compare", small, middle, large});
  REQUIRE(three.code == 0);
  CHECK(std::stod(field(three.out, "regression.slope")) > 0);
  CHECK(three.out.find("rank,label,capacity,loss") != std::string::npos);

  write_curve_file(dir / "apart.curve", [](double n) { return 0.1 + 5 / n; }, 7000, 90000, 8, 1e-4);
  REQUIRE(run({"fit", dir / "apart.curve"}).code == 0);
  CHECK(run({"compare", small, dir / "apart.report"}).code == cli::kExitConfig);
}

TEST_CASE("sgld command") {
  TempDir dir;
  const auto quad = run({"sgld", "--learner", "quadratic-test", "--schedule", "5,10,20,40", "--chains", "5",
                         "--steps-per-epoch", "500", "--samples", "200", "--equilibration", "10", "--seed", "1",
                         "--out", dir / "q.records"});
  REQUIRE(quad.code == 0);
  CHECK(slurp(dir / "q.records").find("# scale=probability-complement") != std::string::npos);
  CHECK(ingest_records(dir / "q.records").scale == kScaleProbComplement);

  const auto knn = run({"sgld", "--learner", "knn", "--synthetic", "d=3,kappa=1", "--schedule", "20,40", "--out",
                        dir / "k.records"});
  CHECK(knn.code == cli::kExitConfig);
  CHECK(knn.err.find("learner not differentiable") != std::string::npos);

  const auto exhausted = run({"sgld", "--learner", "logistic", "--synthetic", "d=3,kappa=1,rows=50", "--schedule",
                              "20,400", "--out", dir / "e.records"});
  CHECK(exhausted.code == cli::kExitConfig);
  CHECK(exhausted.err.find("ScheduleExhaustsData") != std::string::npos);
}

TEST_CASE("executable exit codes") {
  const std::string tool = CAPMETER_TOOL_PATH;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((tool + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(status("--help") == 0);
  CHECK(status("oracle --lambda 1 --eps 1 --exact") == 0);
  CHECK(status("run --synthetic d=2") == 2);
  CHECK(status("no-such-command") == 2);
}
