#include "capmeter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "capmeter/errors.hpp"
#include "capmeter/text.hpp"

namespace capmeter {

void Dataset::validate() const {
  if (size() == 0) throw Error(ErrorCode::InvariantViolation, "dataset is empty");
  if (labels.size() != size()) throw Error(ErrorCode::InvariantViolation, "label count does not match rows");
  if (!inputs.allFinite()) throw Error(ErrorCode::InvariantViolation, "non-finite input entry");
  if (task == Task::Classification) {
    if (m_classes < 2) throw Error(ErrorCode::InvariantViolation, "need at least two classes");
    for (double y : labels)
      if (!(y >= 0 && y < m_classes) || y != std::floor(y))
        throw Error(ErrorCode::InvariantViolation, "label out of range: " + text::format_real(y));
  } else {
    for (double y : labels)
      if (!std::isfinite(y)) throw Error(ErrorCode::InvariantViolation, "non-finite regression target");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.task = task;
  out.m_classes = m_classes;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.inputs.row(static_cast<Eigen::Index>(r)) = inputs.row(static_cast<Eigen::Index>(rows[r]));
    out.labels.push_back(labels[rows[r]]);
  }
  return out;
}

Dataset read_tabular(std::istream& in, LabelMode mode) {
  std::vector<std::vector<double>> features;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> label_lines;
  std::size_t width = 0;
  bool header_allowed = true;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cells = text::split(body, ',');

    if (header_allowed) {
      header_allowed = false;
      const bool numeric_first = text::parse_real(cells.front()).has_value();
      if (!numeric_first) continue;  // column-name header
    }
    if (cells.size() < 2)
      throw ParseError(ErrorCode::ParseError, line_no, 0, "need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError(ErrorCode::ParseError, line_no, 0,
                       "expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()));

    std::vector<double> row;
    row.reserve(width - 1);
    for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
      auto v = text::parse_real(cells[c]);
      if (!v || !std::isfinite(*v))
        throw ParseError(ErrorCode::ParseError, line_no, c + 1,
                         "non-numeric feature '" + std::string(text::trim(cells[c])) + "'");
      row.push_back(*v);
    }
    features.push_back(std::move(row));
    raw_labels.emplace_back(text::trim(cells.back()));
    label_lines.push_back(line_no);
  }
  if (features.empty()) throw ParseError(ErrorCode::ParseError, line_no, 0, "no data rows");

  std::vector<std::optional<double>> numeric;
  numeric.reserve(raw_labels.size());
  std::size_t n_numeric = 0;
  bool all_integral = true;
  for (const auto& s : raw_labels) {
    numeric.push_back(text::parse_real(s));
    if (numeric.back()) {
      ++n_numeric;
      if (*numeric.back() != std::floor(*numeric.back())) all_integral = false;
    }
  }
  if (n_numeric != 0 && n_numeric != raw_labels.size()) {
    const auto bad = std::find_if(numeric.begin(), numeric.end(), [](const auto& v) { return !v; });
    const std::size_t idx = static_cast<std::size_t>(bad - numeric.begin());
    throw ParseError(ErrorCode::MixedTypes, label_lines[idx], width,
                     "label column mixes numeric and symbolic values");
  }

  Dataset ds;
  ds.inputs.resize(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t r = 0; r < features.size(); ++r)
    for (std::size_t c = 0; c + 1 < width; ++c)
      ds.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = features[r][c];

  const bool regression =
      mode == LabelMode::Regression || (mode == LabelMode::Auto && n_numeric > 0 && !all_integral);
  if (regression) {
    if (n_numeric == 0) throw ParseError(ErrorCode::MixedTypes, label_lines.front(), width, "regression needs numeric labels");
    ds.task = Task::Regression;
    ds.m_classes = 0;
    for (const auto& v : numeric) ds.labels.push_back(*v);
    ds.validate();
    return ds;
  }

  // Sorted remapping: numeric labels by value, symbolic labels lexicographically.
  std::vector<std::size_t> codes(raw_labels.size());
  if (n_numeric > 0) {
    std::map<double, std::size_t> index;
    for (const auto& v : numeric) index.emplace(*v, 0);
    std::size_t next = 0;
    for (auto& [k, v] : index) v = next++;
    for (std::size_t i = 0; i < numeric.size(); ++i) codes[i] = index.at(*numeric[i]);
    ds.m_classes = static_cast<int>(index.size());
  } else {
    std::map<std::string, std::size_t> index;
    for (const auto& s : raw_labels) index.emplace(s, 0);
    std::size_t next = 0;
    for (auto& [k, v] : index) v = next++;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) codes[i] = index.at(raw_labels[i]);
    ds.m_classes = static_cast<int>(index.size());
  }
  ds.m_classes = std::max(ds.m_classes, 2);
  ds.task = Task::Classification;
  for (std::size_t c : codes) ds.labels.push_back(static_cast<double>(c));
  ds.validate();
  return ds;
}

Dataset load_tabular(const std::filesystem::path& path, LabelMode mode) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open data file " + path.string());
  return read_tabular(in, mode);
}

}  // namespace capmeter
