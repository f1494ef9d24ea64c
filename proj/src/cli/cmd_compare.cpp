#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/report.hpp"
#include "capmeter/statistics.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

struct CompareOptions {
  std::vector<std::string> reports;
  std::optional<std::int64_t> at;
  std::string out;
};

int do_compare(const CompareOptions& o, Context& ctx) {
  if (o.reports.size() < 2) throw Error(ErrorCode::ConfigError, "compare needs at least 2 fit reports");
  std::vector<report::ModelPoints> models;
  for (const auto& path : o.reports) models.push_back(report::read_model_points(path));
  for (const auto& m : models)
    if (m.scale != models.front().scale)
      throw Error(ErrorCode::ConfigError, "reports mix energy scales '" + models.front().scale + "' and '" +
                                              m.scale + "'");

  std::set<std::int64_t> shared(models.front().n.begin(), models.front().n.end());
  for (const auto& m : models) {
    std::set<std::int64_t> mine(m.n.begin(), m.n.end()), both;
    std::set_intersection(shared.begin(), shared.end(), mine.begin(), mine.end(), std::inserter(both, both.end()));
    shared = std::move(both);
  }
  if (shared.empty()) throw Error(ErrorCode::ConfigError, "fit reports share no sample size N");

  auto lookup = [](const report::ModelPoints& m, std::int64_t n) {
    const auto i = static_cast<std::size_t>(std::find(m.n.begin(), m.n.end(), n) - m.n.begin());
    return std::pair{m.capacity[i], m.loss[i]};
  };

  std::ostringstream out;
  using text::format_real;
  out << "models = " << models.size() << '\n';
  std::string shared_text;
  for (auto n : shared) shared_text += (shared_text.empty() ? "" : ",") + std::to_string(n);
  out << "shared_n = " << shared_text << '\n';

  const std::int64_t n_at = o.at ? *o.at : *shared.rbegin();
  if (!shared.count(n_at))
    throw Error(ErrorCode::ConfigError, "N=" + std::to_string(n_at) + " is not shared by every report");

  for (auto n : shared) {
    std::vector<double> caps, losses;
    for (const auto& m : models) {
      const auto [c, l] = lookup(m, n);
      caps.push_back(c);
      losses.push_back(l);
    }
    out << "kendall_tau(N=" << n << ") = ";
    try {
      out << format_real(kendall_tau(caps, losses)) << '\n';
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllTied) throw;
      out << "undefined\n";
    }
  }

  // Across models at one N.
  std::vector<std::pair<double, double>> points;
  for (const auto& m : models) points.push_back(lookup(m, n_at));
  out << "regression_n = " << n_at << '\n';
  if (points.size() < 3) {
    ctx.err << "warning: capacity-loss regression refused: needs at least 3 models, have " << points.size()
            << '\n';
    out << "regression = refused\n";
  } else {
    try {
      const auto reg = capacity_loss_regression(points);
      out << "regression.points = " << reg.n << '\n';
      out << "regression.slope = " << format_real(reg.slope) << '\n';
      out << "regression.slope_stderr = " << format_real(reg.slope_stderr) << '\n';
      out << "regression.intercept = " << format_real(reg.intercept) << '\n';
      out << "regression.p_value = " << format_real(reg.p_value) << '\n';
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDesign) throw;
      ctx.err << "warning: capacity-loss regression refused: " << e.what() << '\n';
      out << "regression = refused\n";
    }
  }

  const auto n_rank = n_at;
  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lookup(models[a], n_rank).first < lookup(models[b], n_rank).first;
  });
  out << "ranking_n = " << n_rank << '\n';
  out << "rank,label,capacity,loss\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto [c, l] = lookup(models[order[r]], n_rank);
    out << r + 1 << ',' << models[order[r]].label << ',' << format_real(c) << ',' << format_real(l) << '\n';
  }

  ctx.out << out.str();
  if (!o.out.empty()) write_text_file(o.out, out.str());
  return kExitOk;
}

}  // namespace

Command add_compare(CLI::App& app, Context& ctx) {
  auto opts = std::make_shared<CompareOptions>();
  auto* sub = app.add_subcommand("compare", "Rank models by capacity and relate capacity to held-out loss");
  sub->add_option("reports", opts->reports, "Fit reports (text or JSON) to compare")->required();
  sub->add_option("--at", opts->at, "Sample size for the regression and ranking (default: largest shared N)");
  sub->add_option("--out", opts->out, "Also write the comparison to this file");
  return {sub, [opts, &ctx] { return do_compare(*opts, ctx); }};
}

}  // namespace capmeter::cli
