#include "capmeter/report.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "capmeter/cli.hpp"
#include "capmeter/errors.hpp"
#include "capmeter/text.hpp"

namespace capmeter::report {

using nlohmann::ordered_json;
using text::format_real;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_args(const std::vector<std::string>& args) {
  std::string line = "capmeter";
  for (const auto& a : args) {
    line += ' ';
    line += a;
  }
  return line;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : "undefined"; }

ordered_json json_opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string covariance_text(const Eigen::MatrixXd& m) {
  std::string s;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!s.empty()) s += ',';
      s += format_real(m(i, j));
    }
  return s;
}

ordered_json covariance_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<std::string> Manifest::comment_lines() const {
  std::vector<std::string> lines;
  lines.push_back("command: " + join_args(command_line));
  lines.push_back(std::string("version: capmeter ") + cli::kVersion +
                  " (oracle 1, protocol 1, learners 1, estimators 1, sgld 1)");
  lines.push_back("seed: " + std::to_string(seed));
  for (const auto& [k, v] : config) lines.push_back("config: " + k + "=" + v);
  for (const auto& [path, digest] : input_digests) lines.push_back("input: " + path + " fnv1a=" + digest);
  lines.push_back("timestamp: " + timestamp);
  return lines;
}

Manifest make_manifest(std::string command, const std::vector<std::string>& args) {
  Manifest m;
  m.command = std::move(command);
  m.command_line = args;
  m.timestamp = utc_now();
  return m;
}

std::string digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text::hex64(text::fnv1a(bytes));
}

void write_fit_text(std::ostream& out, const FitReport& r, const Manifest& manifest) {
  for (const auto& line : manifest.comment_lines()) out << "# " << line << '\n';
  auto kv = [&](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };

  kv("label", r.label);
  kv("input", r.input);
  kv("scale", r.scale);
  kv("points", std::to_string(r.points));
  kv("n_min", std::to_string(r.n_min));
  kv("n_max", std::to_string(r.n_max));
  if (r.params) kv("params", format_real(*r.params));

  if (r.sigmoid) {
    const auto& s = *r.sigmoid;
    kv("sigmoid.a", format_real(s.a));
    kv("sigmoid.b", format_real(s.b));
    kv("sigmoid.c", format_real(s.c));
    kv("sigmoid.u_inf", format_real(s.u_inf));
    kv("sigmoid.covariance", covariance_text(s.covariance));
    kv("sigmoid.residual_rms", format_real(s.residual_rms));
    kv("sigmoid.iterations", std::to_string(s.iterations));
    kv("sigmoid.start_index", std::to_string(s.start_index));
    kv("sigmoid.n_star", opt_real(r.n_star));
    kv("sigmoid.guidance", r.guidance ? std::string(to_string(*r.guidance)) : "undefined");
  }
  if (r.sigmoid_capacity) {
    kv("sigmoid.capacity_at_n_max", format_real(r.sigmoid_capacity->value));
    kv("sigmoid.capacity_stderr", format_real(r.sigmoid_capacity->std_error));
    if (r.params) kv("sigmoid.capacity_per_param", cli::format_percent(r.sigmoid_capacity->value, *r.params));
  }
  if (!r.sigmoid_note.empty()) kv("sigmoid.note", r.sigmoid_note);

  if (r.polynomial) {
    kv("polynomial.degree", std::to_string(r.polynomial->degree));
    kv("polynomial.active_constraints", std::to_string(r.polynomial->active_constraints));
  }
  if (r.polynomial_capacity) {
    kv("polynomial.capacity_at_n_max", format_real(r.polynomial_capacity->value));
    kv("polynomial.capacity_stderr", format_real(r.polynomial_capacity->std_error));
    kv("polynomial.stderr_approximate", r.polynomial_capacity->approximate ? "true" : "false");
    if (r.params)
      kv("polynomial.capacity_per_param", cli::format_percent(r.polynomial_capacity->value, *r.params));
  }
  if (!r.polynomial_note.empty()) kv("polynomial.note", r.polynomial_note);

  out << "table = n,u_mean,u_stderr,c_sigmoid,c_polynomial\n";
  for (const auto& row : r.table) {
    out << "row = " << row.n << ',' << format_real(row.u_mean) << ',' << format_real(row.u_stderr) << ','
        << opt_real(row.c_sigmoid) << ',' << opt_real(row.c_polynomial) << '\n';
  }
}

void write_fit_json(std::ostream& out, const FitReport& r, const Manifest& manifest) {
  ordered_json j;
  j["manifest"] = manifest.comment_lines();
  j["label"] = r.label;
  j["input"] = r.input;
  j["scale"] = r.scale;
  j["points"] = r.points;
  j["n_min"] = r.n_min;
  j["n_max"] = r.n_max;
  j["params"] = json_opt(r.params);
  if (r.sigmoid) {
    const auto& s = *r.sigmoid;
    ordered_json sj;
    sj["a"] = s.a;
    sj["b"] = s.b;
    sj["c"] = s.c;
    sj["u_inf"] = s.u_inf;
    sj["covariance"] = covariance_json(s.covariance);
    sj["residual_rms"] = s.residual_rms;
    sj["iterations"] = s.iterations;
    sj["n_star"] = json_opt(r.n_star);
    sj["guidance"] = r.guidance ? ordered_json(std::string(to_string(*r.guidance))) : ordered_json(nullptr);
    if (r.sigmoid_capacity) {
      sj["capacity_at_n_max"] = r.sigmoid_capacity->value;
      sj["capacity_stderr"] = r.sigmoid_capacity->std_error;
    }
    j["sigmoid"] = sj;
  } else {
    j["sigmoid"] = nullptr;
  }
  if (r.polynomial) {
    ordered_json pj;
    pj["degree"] = r.polynomial->degree;
    pj["active_constraints"] = r.polynomial->active_constraints;
    if (r.polynomial_capacity) {
      pj["capacity_at_n_max"] = r.polynomial_capacity->value;
      pj["capacity_stderr"] = r.polynomial_capacity->std_error;
      pj["stderr_approximate"] = r.polynomial_capacity->approximate;
    }
    j["polynomial"] = pj;
  } else {
    j["polynomial"] = nullptr;
  }
  ordered_json table = ordered_json::array();
  for (const auto& row : r.table) {
    ordered_json rj;
    rj["n"] = row.n;
    rj["u_mean"] = row.u_mean;
    rj["u_stderr"] = row.u_stderr;
    rj["c_sigmoid"] = json_opt(row.c_sigmoid);
    rj["c_polynomial"] = json_opt(row.c_polynomial);
    table.push_back(rj);
  }
  j["table"] = table;
  out << j.dump(2) << '\n';
}

ModelPoints read_model_points(const std::filesystem::path& path) {
  std::filesystem::path json_path = path;
  if (path.extension() != ".json") json_path.replace_extension(".json");
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open fit report " + json_path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "malformed fit report " + json_path.string() + ": " + e.what());
  }
  ModelPoints points;
  try {
    points.label = j.at("label").get<std::string>();
    points.scale = j.at("scale").get<std::string>();
    for (const auto& row : j.at("table")) {
      const auto& c = !row.at("c_sigmoid").is_null() ? row.at("c_sigmoid") : row.at("c_polynomial");
      if (c.is_null()) continue;
      points.n.push_back(row.at("n").get<std::int64_t>());
      points.capacity.push_back(c.get<double>());
      points.loss.push_back(row.at("u_mean").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "fit report " + json_path.string() + " lacks a field: " + e.what());
  }
  return points;
}

}  // namespace capmeter::report
