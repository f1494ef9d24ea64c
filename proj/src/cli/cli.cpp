#include "capmeter/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "capmeter/errors.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/synthetic.hpp"
#include "capmeter/text.hpp"
#include "common.hpp"

namespace capmeter::cli {

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::TrainingFailure:
    case ErrorCode::ChainFailure:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteState:
    case ErrorCode::EmptyTrainingSet:
      return kExitTraining;
    case ErrorCode::FitDiverged:
    case ErrorCode::DegenerateCurve:
    case ErrorCode::SolverFailure:
    case ErrorCode::QuadratureFailure:
      return kExitFit;
    default:
      return kExitConfig;
  }
}

std::size_t parse_size(std::string_view token, std::string_view what) {
  const auto v = text::parse_int(token);
  if (!v || *v <= 0)
    throw Error(ErrorCode::ConfigError, std::string(what) + ": expected a positive integer, got '" +
                                            std::string(token) + "'");
  return static_cast<std::size_t>(*v);
}

}  // namespace

std::vector<std::size_t> parse_n_grid(std::string_view spec) {
  const auto trimmed = text::trim(spec);
  if (trimmed.empty()) throw Error(ErrorCode::ConfigError, "empty N grid");
  if (trimmed.find(':') != std::string_view::npos) {
    const auto parts = text::split(trimmed, ':');
    if (parts.size() != 3 || parts[2].size() < 4 || parts[2].substr(parts[2].size() - 3) != "log")
      throw Error(ErrorCode::ConfigError, "N grid '" + std::string(spec) + "' is not of the form lo:hi:Klog");
    const std::size_t lo = parse_size(parts[0], "N grid lower end");
    const std::size_t hi = parse_size(parts[1], "N grid upper end");
    const std::size_t count = parse_size(parts[2].substr(0, parts[2].size() - 3), "N grid count");
    if (hi < lo) throw Error(ErrorCode::ConfigError, "N grid upper end is below the lower end");
    return log_grid(lo, hi, count);
  }
  std::vector<std::size_t> grid;
  for (auto token : text::split(trimmed, ',')) grid.push_back(parse_size(token, "N grid entry"));
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1]) throw Error(ErrorCode::ConfigError, "N grid must be strictly increasing");
  return grid;
}

std::map<std::string, std::string> parse_key_values(std::string_view spec) {
  std::map<std::string, std::string> kv;
  if (text::trim(spec).empty()) return kv;
  for (auto item : text::split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, "expected key=value, got '" + std::string(item) + "'");
    std::string key(text::trim(item.substr(0, eq)));
    std::string value(text::trim(item.substr(eq + 1)));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "empty key in '" + std::string(spec) + "'");
    if (!kv.emplace(key, value).second) throw Error(ErrorCode::ConfigError, "key '" + key + "' given twice");
  }
  return kv;
}

SyntheticConfig parse_synthetic_spec(std::string_view spec, std::size_t* rows) {
  SyntheticConfig config;
  if (rows) *rows = 0;
  for (const auto& [key, value] : parse_key_values(spec)) {
    if (key == "kappa") {
      const auto v = text::parse_real(value);
      if (!v || !(*v >= 0.0)) throw Error(ErrorCode::ConfigError, "kappa must be a non-negative real");
      config.kappa = *v;
    } else if (key == "d") {
      config.d = parse_size(value, "d");
    } else if (key == "teacher") {
      config.teacher_hidden = parse_size(value, "teacher");
    } else if (key == "classes") {
      const std::size_t m = parse_size(value, "classes");
      if (m < 2) throw Error(ErrorCode::ConfigError, "classes must be at least 2");
      config.m_classes = static_cast<int>(m);
    } else if (key == "seed") {
      const auto v = text::parse_int(value);
      if (!v || *v < 0) throw Error(ErrorCode::ConfigError, "seed must be a non-negative integer");
      config.seed = static_cast<std::uint64_t>(*v);
    } else if (key == "rows") {
      const std::size_t r = parse_size(value, "rows");
      if (rows) *rows = r;
    } else {
      throw Error(ErrorCode::ConfigError, "unknown synthetic key '" + key + "'");
    }
  }
  return config;
}

std::string format_percent(double value, double params) {
  if (!(params > 0.0)) throw Error(ErrorCode::ConfigError, "parameter count must be positive");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * value / params);
  return buf;
}

std::string strip_timestamps(std::string_view content) {
  std::string out;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(pos, end - pos);
    if (line.find("timestamp:") == std::string_view::npos) {
      out.append(line);
      if (end < content.size()) out.push_back('\n');
    }
    pos = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared option groups

void add_data_options(CLI::App* app, DataOptions& opts) {
  app->add_option("--synthetic", opts.synthetic, "Synthetic data: d=20,kappa=1[,teacher=..,classes=..,seed=..,rows=..]");
  app->add_option("--data", opts.data_path, "Tabular data file (features..., label)");
  app->add_option("--label-mode", opts.label_mode, "Label interpretation: auto, classification or regression")
      ->check(CLI::IsMember({"auto", "classification", "regression"}));
}

void add_learner_options(CLI::App* app, LearnerOptions& opts) {
  app->add_option("--k", opts.k, "kNN neighbours");
  app->add_option("--alpha", opts.alpha, "kNN count smoothing");
  app->add_option("--l2", opts.l2, "Logistic L2 penalty on the mean NLL");
  app->add_option("--prior-precision", opts.prior_precision, "Logistic Gaussian weight-prior precision (MAP)");
  app->add_option("--epochs", opts.epochs, "Training epochs (logistic default 2000, mlp default 50)");
  app->add_option("--lr", opts.lr, "Learning rate (logistic cap 1.0, mlp peak 0.1)");
  app->add_option("--hidden", opts.hidden, "MLP hidden width");
  app->add_option("--batch", opts.batch, "MLP minibatch size");
  app->add_option("--momentum", opts.momentum, "MLP Nesterov momentum");
  app->add_option("--weight-decay", opts.weight_decay, "MLP weight decay");
  app->add_option("--sigma", opts.sigma, "Regression noise scale");
  app->add_flag("--normalize-inputs,!--raw-inputs", opts.normalize_inputs,
                "MLP: scale inputs to unit mean squared norm (default on)");
}

LoadedData load_data(const DataOptions& opts, std::size_t min_rows) {
  if (opts.synthetic.empty() == opts.data_path.empty())
    throw Error(ErrorCode::ConfigError, "exactly one of --synthetic or --data is required");
  LoadedData loaded;
  if (!opts.synthetic.empty()) {
    std::size_t rows = 0;
    const auto config = parse_synthetic_spec(opts.synthetic, &rows);
    if (rows == 0) rows = min_rows;
    loaded.data = gen_synthetic(config, rows);
    loaded.dataset_id = "synthetic-d" + std::to_string(config.d) + "-kappa" + text::format_real(config.kappa) +
                        "-seed" + std::to_string(config.seed);
    return loaded;
  }
  const LabelMode mode = opts.label_mode == "classification" ? LabelMode::Classification
                         : opts.label_mode == "regression"   ? LabelMode::Regression
                                                             : LabelMode::Auto;
  loaded.data = load_tabular(opts.data_path, mode);
  loaded.dataset_id = std::filesystem::path(opts.data_path).stem().string();
  loaded.digest_path = opts.data_path;
  return loaded;
}

std::unique_ptr<Learner> make_learner(const LearnerOptions& opts) {
  if (opts.learner == "knn") {
    KnnConfig c;
    c.k = opts.k;
    c.alpha = opts.alpha;
    c.sigma = opts.sigma;
    if (c.k < 1) throw Error(ErrorCode::ConfigError, "--k must be at least 1");
    return knn_learner(c);
  }
  if (opts.learner == "logistic") {
    LogisticConfig c;
    c.l2 = opts.l2;
    c.prior_precision = opts.prior_precision;
    if (opts.epochs) c.epochs = *opts.epochs;
    if (opts.lr) c.lr = *opts.lr;
    c.sigma = opts.sigma;
    return logistic_learner(c);
  }
  if (opts.learner == "mlp") {
    MlpConfig c;
    c.hidden = opts.hidden;
    if (opts.epochs) c.epochs = *opts.epochs;
    if (opts.lr) c.lr_max = *opts.lr;
    c.batch = opts.batch;
    c.momentum = opts.momentum;
    c.weight_decay = opts.weight_decay;
    c.normalize_inputs = opts.normalize_inputs;
    c.sigma = opts.sigma;
    return mlp_learner(c);
  }
  if (opts.learner == "constant") return constant_learner();
  throw Error(ErrorCode::ConfigError, "unknown learner '" + opts.learner + "'");
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("CAPMETER_JOBS")) {
    const auto v = text::parse_int(env);
    if (!v || *v < 1) throw Error(ErrorCode::ConfigError, "CAPMETER_JOBS must be a positive integer");
    return static_cast<std::size_t>(*v);
  }
  return 1;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::ConfigError, "failed writing " + path.string());
}

std::filesystem::path with_extension(std::filesystem::path path, const std::string& ext) {
  path.replace_extension(ext);
  return path;
}

// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"capmeter: learning-capacity estimation from held-out energy curves"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("capmeter ") + kVersion);
  Context ctx{args, out, err};

  std::vector<Command> commands;
  try {
    commands.push_back(add_run(app, ctx));
    commands.push_back(add_fit(app, ctx));
    commands.push_back(add_oracle(app, ctx));
    commands.push_back(add_compare(app, ctx));
    commands.push_back(add_sgld(app, ctx));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "capmeter " << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  for (auto& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      return cmd.action();
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return exit_code_for(e.code());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitConfig;
    }
  }
  err << "error: no subcommand given\n";
  return kExitConfig;
}

}  // namespace capmeter::cli
