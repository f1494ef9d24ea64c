#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/oracle.hpp"
#include "capmeter/spectrum_io.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

struct OracleOptions {
  std::string spectrum;
  std::string lambda;
  std::optional<double> eps;
  std::string offsets;
  std::string n_list = "1000";
  bool exact = false;
  bool hm = false;
  std::vector<std::int64_t> dim_at;
  bool bound = false;
  std::optional<double> kappa;
  std::optional<double> dist2;
  bool log_z = false;
  bool uniform = false;
  bool default_eps = false;
};

HessianSpectrum load(const OracleOptions& o) {
  if (o.spectrum.empty() == o.lambda.empty())
    throw Error(ErrorCode::ConfigError, "exactly one of --spectrum or --lambda is required");
  if (!o.spectrum.empty()) {
    if (o.eps || !o.offsets.empty())
      throw Error(ErrorCode::ConfigError, "--eps and --offsets apply to inline spectra only");
    return load_spectrum(o.spectrum);
  }
  const auto eigs = text::parse_real_list(o.lambda);
  if (!eigs) throw Error(ErrorCode::InvalidSpectrum, "malformed --lambda list '" + o.lambda + "'");
  if (!o.eps) throw Error(ErrorCode::ConfigError, "--eps is required with --lambda");
  std::optional<std::vector<double>> offsets;
  if (!o.offsets.empty()) {
    offsets = text::parse_real_list(o.offsets);
    if (!offsets) throw Error(ErrorCode::InvalidSpectrum, "malformed --offsets list '" + o.offsets + "'");
  }
  return HessianSpectrum(*eigs, *o.eps, offsets);
}

int do_oracle(const OracleOptions& o, Context& ctx) {
  const auto spec = load(o);
  const auto ns = text::parse_real_list(o.n_list);
  if (!ns || ns->empty()) throw Error(ErrorCode::ConfigError, "malformed --n list '" + o.n_list + "'");
  const bool select_any = o.exact || o.hm || !o.dim_at.empty() || o.bound || o.log_z || o.default_eps;
  const bool all = !select_any;
  auto& out = ctx.out;
  using text::format_real;
  auto n_text = [](double n) { return format_real(n); };

  out << "p = " << spec.p() << '\n';
  out << "epsilon = " << format_real(spec.epsilon()) << '\n';
  if (o.exact || all)
    for (double n : *ns) out << "capacity_exact(N=" << n_text(n) << ") = " << format_real(quad_capacity_exact(spec, n)) << '\n';
  if (o.hm || all) out << "capacity_hm = " << format_real(quad_capacity_hm(spec)) << '\n';
  if (o.log_z || all) {
    const PriorKind prior = (o.uniform || spec.epsilon() == 0.0) ? PriorKind{UniformPrior{}} : gaussian_prior(spec);
    for (double n : *ns) out << "log_z(N=" << n_text(n) << ") = " << format_real(quad_log_z(spec, prior, n)) << '\n';
  }
  std::vector<std::int64_t> dims = o.dim_at;
  if (all)
    for (double n : *ns)
      if (n >= 2.0) dims.push_back(static_cast<std::int64_t>(n));
  for (auto n : dims) out << "effective_dim(N=" << n << ") = " << pacbayes_effective_dim(spec, n) << '\n';
  if (o.default_eps) {
    const auto choice = pacbayes_epsilon_default(spec);
    out << "epsilon_default = " << format_real(choice.value) << '\n';
    out << "epsilon_default_clamped = " << (choice.clamped ? "true" : "false") << '\n';
  }
  if (o.bound) {
    if (!o.kappa || !o.dist2) throw Error(ErrorCode::ConfigError, "--bound needs --kappa and --dist2");
    for (double n : *ns)
      out << "pacbayes_bound(N=" << n_text(n) << ") = "
          << format_real(pacbayes_bound(spec, static_cast<std::int64_t>(n), *o.kappa, *o.dist2)) << '\n';
  }
  return kExitOk;
}

}  // namespace

Command add_oracle(CLI::App& app, Context& ctx) {
  auto opts = std::make_shared<OracleOptions>();
  auto* sub = app.add_subcommand("oracle", "Closed-form capacities, partition functions and PAC-Bayes quantities");
  sub->add_option("--spectrum", opts->spectrum, "Spectrum file (one eigenvalue per line, '# epsilon=' header)");
  sub->add_option("--lambda", opts->lambda, "Inline eigenvalues, comma separated");
  sub->add_option("--eps", opts->eps, "Prior precision for inline eigenvalues");
  sub->add_option("--offsets", opts->offsets, "Inline prior-mean offsets, comma separated");
  sub->add_option("--n", opts->n_list, "Sample sizes, comma separated");
  sub->add_flag("--exact", opts->exact, "Print the exact quadratic capacity");
  sub->add_flag("--hm", opts->hm, "Print the harmonic-mean approximation");
  sub->add_option("--dim-at", opts->dim_at, "Print the PAC-Bayes effective dimension at this N");
  sub->add_flag("--bound", opts->bound, "Print the PAC-Bayes bound (needs --kappa and --dist2)");
  sub->add_option("--kappa", opts->kappa, "PAC-Bayes confidence parameter");
  sub->add_option("--dist2", opts->dist2, "Squared distance from prior mean to posterior mean");
  sub->add_flag("--log-z", opts->log_z, "Print log Z(N)");
  sub->add_flag("--uniform", opts->uniform, "Use the flat prior for --log-z");
  sub->add_flag("--default-eps", opts->default_eps, "Print the default PAC-Bayes prior precision");
  return {sub, [opts, &ctx] { return do_oracle(*opts, ctx); }};
}

}  // namespace capmeter::cli
