#pragma once

// Run manifests, fit reports and the compare table. Reports come in a key = value
// text form with a stable field order and a JSON twin with the same basename.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "capmeter/estimators.hpp"
#include "capmeter/records.hpp"

namespace capmeter::report {

struct Manifest {
  std::string command;
  std::vector<std::string> command_line;
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path, fnv1a hex
  std::string timestamp;                                          // UTC, ISO 8601

  // Comment lines (without '#') in a fixed order; the timestamp line is last.
  std::vector<std::string> comment_lines() const;
};

Manifest make_manifest(std::string command, const std::vector<std::string>& args);
std::string digest_file(const std::filesystem::path& path);

struct FitRow {
  std::int64_t n = 0;
  double u_mean = 0.0;
  double u_stderr = 0.0;
  std::optional<double> c_sigmoid;
  std::optional<double> c_polynomial;
};

struct FitReport {
  std::string label;
  std::string input;
  std::string scale;
  std::size_t points = 0;
  std::int64_t n_min = 0;
  std::int64_t n_max = 0;
  std::optional<double> params;

  std::optional<SigmoidCapacityModel> sigmoid;
  std::optional<CapacityEstimate> sigmoid_capacity;
  std::optional<double> n_star;
  std::optional<Guidance> guidance;
  std::string sigmoid_note;

  std::optional<PolynomialEnergyModel> polynomial;
  std::optional<CapacityEstimate> polynomial_capacity;
  std::string polynomial_note;

  std::vector<FitRow> table;
};

void write_fit_text(std::ostream& out, const FitReport& report, const Manifest& manifest);
void write_fit_json(std::ostream& out, const FitReport& report, const Manifest& manifest);

// What compare needs from a fit report: per-N capacity and held-out energy.
struct ModelPoints {
  std::string label;
  std::string scale;
  std::vector<std::int64_t> n;
  std::vector<double> capacity;
  std::vector<double> loss;
};

// Reads the JSON twin. A ".txt"/".report" path is redirected to its ".json" sibling.
ModelPoints read_model_points(const std::filesystem::path& path);

// Line chart of U and C against N on log axes, as SVG. A pure function of the rows.
void write_svg_plot(std::ostream& out, const std::string& title, const std::vector<FitRow>& rows);

}  // namespace capmeter::report
