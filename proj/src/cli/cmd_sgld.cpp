#include <sstream>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/oracle.hpp"
#include "capmeter/report.hpp"
#include "capmeter/sgld.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

struct SgldOptions {
  DataOptions data;
  LearnerOptions learner;
  std::string lambda = "1,1";
  double prior_eps = 1.0;
  std::string schedule;
  std::size_t chains = 10;
  double step = 1e-3;
  std::size_t equilibration = 20;
  std::size_t samples = 10;
  std::size_t batch = 64;
  std::size_t steps_per_epoch = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::string out;
  std::string curve_out;
};

int do_sgld(const SgldOptions& o, Context& ctx) {
  const std::string& name = o.learner.learner;
  if (name == "knn" || name == "constant")
    throw Error(ErrorCode::ConfigError, "learner not differentiable: '" + name + "' has no gradient");
  if (name != "logistic" && name != "mlp" && name != "quadratic-test")
    throw Error(ErrorCode::ConfigError, "unknown learner '" + name + "'");
  if (o.prior_eps < 0.0) throw Error(ErrorCode::ConfigError, "--prior-eps must be non-negative");

  SgldConfig config;
  config.step_size = o.step;
  config.chains = o.chains;
  config.equilibration_epochs = o.equilibration;
  config.samples_per_window = o.samples;
  config.n_schedule = parse_n_grid(o.schedule);
  config.seed = o.seed;
  config.batch_size = o.batch;
  config.steps_per_epoch = o.steps_per_epoch;
  config.burn_in_epochs = o.burn_in;
  config.prior = o.prior_eps > 0.0 ? PriorKind{GaussianPrior{o.prior_eps}} : PriorKind{UniformPrior{}};
  config.threads = o.jobs ? o.jobs : default_jobs();

  auto manifest = report::make_manifest("sgld", ctx.args);
  manifest.seed = o.seed;
  manifest.config = {{"learner", name},
                     {"schedule", o.schedule},
                     {"chains", std::to_string(o.chains)},
                     {"step", text::format_real(o.step)},
                     {"equilibration", std::to_string(o.equilibration)},
                     {"samples", std::to_string(o.samples)},
                     {"prior_eps", text::format_real(o.prior_eps)}};

  std::optional<HessianSpectrum> quadratic;
  std::optional<LoadedData> loaded;
  std::unique_ptr<DifferentiableEnergy> energy;
  std::string dataset_id = "sgld-" + name;
  if (name == "quadratic-test") {
    const auto eigs = text::parse_real_list(o.lambda);
    if (!eigs || eigs->empty()) throw Error(ErrorCode::ConfigError, "malformed --lambda list '" + o.lambda + "'");
    quadratic.emplace(*eigs, o.prior_eps);
    energy = std::make_unique<QuadraticEnergy>(QuadraticEnergy::diagonal(*eigs, config.n_schedule.back()));
    manifest.config.emplace_back("lambda", o.lambda);
  } else {
    loaded.emplace(load_data(o.data, config.n_schedule.back()));
    auto learner = make_learner(o.learner);
    auto model = learner->parametric_model(loaded->data);
    if (!model) throw Error(ErrorCode::ConfigError, "learner not differentiable: '" + name + "'");
    energy = std::make_unique<ModelEnergy>(model, loaded->data);
    dataset_id += "-" + loaded->dataset_id;
    if (!loaded->digest_path.empty())
      manifest.input_digests.emplace_back(loaded->digest_path, report::digest_file(loaded->digest_path));
  }

  const auto result = run_incremental_protocol(*energy, config, dataset_id);
  for (const auto& failure : result.chain_failures) ctx.err << "warning: chain dropped: " << failure << '\n';

  auto comments = manifest.comment_lines();
  comments.push_back(std::string("scale=") + kScaleProbComplement);
  std::ostringstream records;
  write_records(records, result.records, comments);
  write_text_file(o.out, records.str());
  const std::filesystem::path curve_path = o.curve_out.empty() ? with_extension(o.out, ".curve") : std::filesystem::path(o.curve_out);
  std::ostringstream curve_text;
  write_curve(curve_text, result.curve, manifest.comment_lines());
  write_text_file(curve_path, curve_text.str());

  using text::format_real;
  auto& out = ctx.out;
  out << "scale = " << kScaleProbComplement << '\n';
  out << "surviving_chains = " << result.surviving_chains << '\n';
  out << "records_file = " << o.out << '\n';
  out << "curve_file = " << curve_path.string() << '\n';

  std::optional<LogPartition> logz;
  if (quadratic) {
    const PriorKind prior = config.prior;
    const HessianSpectrum spec = *quadratic;
    logz = [spec, prior](double n) { return quad_log_z(spec, prior, n); };
  }
  for (const auto& p : result.curve.points) {
    out << "energy(N=" << p.n << ") = " << format_real(p.u_mean) << " +- " << format_real(p.u_stderr);
    if (logz) out << " oracle " << format_real(prob_complement_energy_from_logz(*logz, static_cast<double>(p.n)));
    out << '\n';
  }
  for (std::size_t t = 0; t < result.capacities.size(); ++t) {
    const auto& c = result.capacities[t];
    const double n1 = static_cast<double>(config.n_schedule[t]);
    const double n2 = static_cast<double>(config.n_schedule[t + 1]);
    out << "capacity(N=" << c.at_n << ",dN=" << config.n_schedule[t + 1] - config.n_schedule[t]
        << ") = " << format_real(c.value) << " +- " << format_real(c.std_error);
    if (logz) {
      const double u1 = prob_complement_energy_from_logz(*logz, n1);
      const double u2 = prob_complement_energy_from_logz(*logz, n2);
      out << " oracle " << format_real(-n1 * n1 * (u2 - u1) / (n2 - n1));
    }
    out << '\n';
  }
  return kExitOk;
}

}  // namespace

Command add_sgld(CLI::App& app, Context& ctx) {
  auto opts = std::make_shared<SgldOptions>();
  auto* sub = app.add_subcommand("sgld", "Langevin-chain estimates of U and C over an incremental sample schedule");
  add_data_options(sub, opts->data);
  sub->add_option("--learner", opts->learner.learner, "logistic, mlp or quadratic-test")->required();
  add_learner_options(sub, opts->learner);
  sub->add_option("--lambda", opts->lambda, "Hessian eigenvalues of the quadratic test energy");
  sub->add_option("--prior-eps", opts->prior_eps, "Gaussian prior precision (0: flat prior)");
  sub->add_option("--schedule", opts->schedule, "Sample sizes: comma list or lo:hi:Klog")->required();
  sub->add_option("--chains", opts->chains, "Number of chains");
  sub->add_option("--step", opts->step, "Langevin step size");
  sub->add_option("--equilibration", opts->equilibration, "Epochs before each sample window");
  sub->add_option("--samples", opts->samples, "Samples per window (one per epoch)");
  sub->add_option("--sgld-batch", opts->batch, "Minibatch size");
  sub->add_option("--steps-per-epoch", opts->steps_per_epoch, "Steps per epoch (0: one pass over the data)");
  sub->add_option("--burn-in", opts->burn_in, "Extra epochs before the first window");
  sub->add_option("--seed", opts->seed, "Master seed");
  sub->add_option("--jobs", opts->jobs, "Worker threads (default CAPMETER_JOBS or 1)");
  sub->add_option("--out", opts->out, "Record file to write")->required();
  sub->add_option("--curve-out", opts->curve_out, "Energy curve file (default: record path with .curve)");
  return {sub, [opts, &ctx] { return do_sgld(*opts, ctx); }};
}

}  // namespace capmeter::cli
