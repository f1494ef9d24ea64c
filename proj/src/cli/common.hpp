#pragma once

// Pieces shared by the subcommands: option groups for data sources and learners,
// and file output helpers.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "capmeter/dataset.hpp"
#include "capmeter/learners.hpp"

namespace capmeter::cli {

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  std::ostream& err;
};

struct Command {
  CLI::App* app = nullptr;
  std::function<int()> action;
};

struct DataOptions {
  std::string synthetic;
  std::string data_path;
  std::string label_mode = "auto";
};

struct LearnerOptions {
  std::string learner;
  int k = 10;
  double alpha = 1.0;
  double l2 = 1e-4;
  double prior_precision = 0.0;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::size_t hidden = 16;
  std::size_t batch = 64;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double sigma = 1.0;
  bool normalize_inputs = true;
};

void add_data_options(CLI::App* app, DataOptions& opts);
void add_learner_options(CLI::App* app, LearnerOptions& opts);

struct LoadedData {
  Dataset data;
  std::string dataset_id;
  std::string digest_path;  // empty for synthetic data
};

// `min_rows` sizes the synthetic pool when the spec gives no rows= entry.
LoadedData load_data(const DataOptions& opts, std::size_t min_rows);

std::unique_ptr<Learner> make_learner(const LearnerOptions& opts);

std::size_t default_jobs();

// Writes `content` to `path`; ConfigError if the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::filesystem::path with_extension(std::filesystem::path path, const std::string& ext);

Command add_run(CLI::App& app, Context& ctx);
Command add_fit(CLI::App& app, Context& ctx);
Command add_oracle(CLI::App& app, Context& ctx);
Command add_compare(CLI::App& app, Context& ctx);
Command add_sgld(CLI::App& app, Context& ctx);

}  // namespace capmeter::cli
