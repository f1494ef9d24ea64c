#include <sstream>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/estimators.hpp"
#include "capmeter/records.hpp"
#include "capmeter/report.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

struct FitOptions {
  std::string input;
  std::string method = "both";
  std::optional<double> params;
  int degree = 7;
  std::optional<std::int64_t> at;
  std::string init;
  std::string label;
  std::string out;
  std::string plot;
};

int do_fit(const FitOptions& o, Context& ctx) {
  const auto curve = load_curve_or_records(o.input);
  curve.validate();
  if (o.params && !(*o.params > 0.0)) throw Error(ErrorCode::ConfigError, "--params must be positive");

  report::FitReport r;
  r.label = o.label.empty() ? std::filesystem::path(o.input).stem().string() : o.label;
  r.input = o.input;
  r.scale = curve.scale;
  r.points = curve.points.size();
  r.n_min = curve.n_min();
  r.n_max = curve.n_max();
  r.params = o.params;
  const double at = o.at ? static_cast<double>(*o.at) : static_cast<double>(curve.n_max());

  const bool want_sigmoid = o.method != "polynomial";
  const bool want_polynomial = o.method != "sigmoid";

  if (want_sigmoid) {
    std::optional<SigmoidInit> init;
    if (!o.init.empty()) {
      const auto v = text::parse_real_list(o.init);
      if (!v || v->size() != 4) throw Error(ErrorCode::ConfigError, "--init expects a,b,c,u_inf");
      init = SigmoidInit{(*v)[0], (*v)[1], (*v)[2], (*v)[3]};
    }
    r.sigmoid = fit_sigmoid_capacity(curve, init);
    r.sigmoid_capacity = capacity_from_sigmoid(*r.sigmoid, at);
    try {
      const auto threshold = freezing_threshold(*r.sigmoid);
      r.n_star = threshold.n_star;
      r.guidance = threshold.guidance(static_cast<double>(curve.n_max()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedThreshold) throw;
      r.sigmoid_note = e.what();
    }
  }
  if (want_polynomial) {
    const int degree = std::min<int>(o.degree, static_cast<int>(curve.points.size()) - 2);
    if (degree < 1) throw Error(ErrorCode::DegenerateCurve, "polynomial fit needs at least 3 points");
    if (degree < o.degree)
      r.polynomial_note = "degree lowered to " + std::to_string(degree) + " for " +
                          std::to_string(curve.points.size()) + " points";
    r.polynomial = fit_monotone_polynomial(curve, degree);
    r.polynomial_capacity = capacity_from_polynomial(*r.polynomial, at);
  }

  for (const auto& p : curve.points) {
    report::FitRow row{p.n, p.u_mean, p.u_stderr, std::nullopt, std::nullopt};
    if (r.sigmoid) row.c_sigmoid = r.sigmoid->capacity(static_cast<double>(p.n));
    if (r.polynomial) row.c_polynomial = capacity_from_polynomial(*r.polynomial, static_cast<double>(p.n)).value;
    r.table.push_back(row);
  }

  auto manifest = report::make_manifest("fit", ctx.args);
  manifest.config = {{"method", o.method}, {"degree", std::to_string(o.degree)}};
  manifest.input_digests.emplace_back(o.input, report::digest_file(o.input));

  std::ostringstream text_report;
  report::write_fit_text(text_report, r, manifest);
  ctx.out << text_report.str();

  const std::filesystem::path out = o.out.empty() ? with_extension(o.input, ".report") : std::filesystem::path(o.out);
  write_text_file(out, text_report.str());
  std::ostringstream json_report;
  report::write_fit_json(json_report, r, manifest);
  write_text_file(with_extension(out, ".json"), json_report.str());

  if (!o.plot.empty()) {
    std::ostringstream svg;
    report::write_svg_plot(svg, r.label, r.table);
    write_text_file(o.plot, svg.str());
  }
  return kExitOk;
}

}  // namespace

Command add_fit(CLI::App& app, Context& ctx) {
  auto opts = std::make_shared<FitOptions>();
  auto* sub = app.add_subcommand("fit", "Fit sigmoid and monotone-polynomial capacity models to an energy curve");
  sub->add_option("input", opts->input, "Record or curve file")->required();
  sub->add_option("--method", opts->method, "both, sigmoid or polynomial")
      ->check(CLI::IsMember({"both", "sigmoid", "polynomial"}));
  sub->add_option("--params", opts->params, "Parameter count p, for C/p");
  sub->add_option("--degree", opts->degree, "Polynomial degree");
  sub->add_option("--at", opts->at, "Evaluate capacity at this N (default: largest N)");
  sub->add_option("--init", opts->init, "Extra sigmoid start a,b,c,u_inf");
  sub->add_option("--label", opts->label, "Model label (default: input file stem)");
  sub->add_option("--out", opts->out, "Report path (default: input with .report); JSON twin uses .json");
  sub->add_option("--plot", opts->plot, "Write an SVG chart of U and C against N");
  return {sub, [opts, &ctx] { return do_fit(*opts, ctx); }};
}

}  // namespace capmeter::cli
