#include <sstream>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/report.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

struct RunOptions {
  DataOptions data;
  LearnerOptions learner;
  std::string n_grid = "50:5000:12log";
  std::size_t boots = 4;
  std::size_t folds = 5;
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::string out;
  std::string curve_out;
  std::string dataset_id;
};

std::string grid_text(const std::vector<std::size_t>& grid) {
  std::string s;
  for (std::size_t n : grid) s += (s.empty() ? "" : ",") + std::to_string(n);
  return s;
}

int do_run(const RunOptions& o, Context& ctx) {
  const auto grid = parse_n_grid(o.n_grid);
  auto learner = make_learner(o.learner);
  auto loaded = load_data(o.data, 10 * grid.back());
  const std::string dataset_id = o.dataset_id.empty() ? loaded.dataset_id : o.dataset_id;

  ProtocolConfig config;
  config.n_boots = o.boots;
  config.k_folds = o.folds;
  config.m_seeds = o.seeds;
  config.n_grid = grid;
  config.master_seed = o.seed;
  const auto jobs = plan_experiment(config, loaded.data.size());
  const auto result = execute_plan(jobs, loaded.data, *learner, dataset_id, o.jobs ? o.jobs : default_jobs());
  const auto curve = estimate_avg_energy(result.records, grid);

  auto manifest = report::make_manifest("run", ctx.args);
  manifest.seed = o.seed;
  manifest.config = {{"learner", learner->describe()},
                     {"dataset_id", dataset_id},
                     {"dataset_rows", std::to_string(loaded.data.size())},
                     {"n_grid", grid_text(grid)},
                     {"boots", std::to_string(o.boots)},
                     {"folds", std::to_string(o.folds)},
                     {"seeds", std::to_string(o.seeds)}};
  if (!loaded.digest_path.empty())
    manifest.input_digests.emplace_back(loaded.digest_path, report::digest_file(loaded.digest_path));
  const auto comments = manifest.comment_lines();

  std::ostringstream records;
  write_records(records, result.records, comments);
  write_text_file(o.out, records.str());

  const std::filesystem::path curve_path = o.curve_out.empty() ? with_extension(o.out, ".curve") : std::filesystem::path(o.curve_out);
  std::ostringstream curve_text;
  write_curve(curve_text, curve, comments);
  write_text_file(curve_path, curve_text.str());

  ctx.out << "records = " << result.records.size() << '\n';
  ctx.out << "records_file = " << o.out << '\n';
  ctx.out << "curve_file = " << curve_path.string() << '\n';
  ctx.out << "clamp_events = " << result.clamp_events << '\n';
  if (result.clamp_events > 0)
    ctx.err << "warning: " << result.clamp_events << " per-example losses were clamped to [0, "
            << text::format_real(kNllClamp) << "]\n";
  ctx.out << kCurveHeader << '\n';
  for (const auto& p : curve.points)
    ctx.out << p.n << ',' << text::format_real(p.u_mean) << ',' << text::format_real(p.u_stderr) << ','
            << p.record_count << '\n';
  return kExitOk;
}

}  // namespace

Command add_run(CLI::App& app, Context& ctx) {
  auto opts = std::make_shared<RunOptions>();
  auto* sub = app.add_subcommand("run", "Run the bootstrap x fold x seed protocol and write held-out records");
  add_data_options(sub, opts->data);
  sub->add_option("--learner", opts->learner.learner, "Learner: knn, logistic, mlp or constant")->required();
  add_learner_options(sub, opts->learner);
  sub->add_option("--n-grid", opts->n_grid, "Sample sizes: lo:hi:Klog or a comma list");
  sub->add_option("--boots", opts->boots, "Bootstrap draws per N");
  sub->add_option("--folds", opts->folds, "Folds per bootstrap draw");
  sub->add_option("--seeds", opts->seeds, "Training seeds per fold");
  sub->add_option("--seed", opts->seed, "Master seed");
  sub->add_option("--jobs", opts->jobs, "Worker threads (default CAPMETER_JOBS or 1)");
  sub->add_option("--out", opts->out, "Record file to write")->required();
  sub->add_option("--curve-out", opts->curve_out, "Energy curve file (default: record path with .curve)");
  sub->add_option("--dataset-id", opts->dataset_id, "Dataset id written into the records");
  return {sub, [opts, &ctx] { return do_run(*opts, ctx); }};
}

}  // namespace capmeter::cli
