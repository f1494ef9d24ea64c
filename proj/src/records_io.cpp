#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "capmeter/errors.hpp"
#include "capmeter/protocol.hpp"
#include "capmeter/records.hpp"
#include "capmeter/text.hpp"

namespace capmeter {

namespace {

std::string scale_from_comment(std::string_view body) {
  body = text::trim(body);
  if (body.starts_with("scale=")) return std::string(text::trim(body.substr(6)));
  return {};
}

std::int64_t int_field(std::string_view cell, std::size_t line, std::size_t col, const char* name) {
  auto v = text::parse_int(cell);
  if (!v) throw ParseError(ErrorCode::ParseError, line, col, std::string(name) + " is not an integer: '" +
                                                             std::string(text::trim(cell)) + "'");
  return *v;
}

}  // namespace

void EnergyCurve::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (i > 0 && p.n <= points[i - 1].n)
      throw Error(ErrorCode::InvariantViolation, "curve sample sizes must be strictly increasing");
    if (!std::isfinite(p.u_mean)) throw Error(ErrorCode::NonFinite, "non-finite energy at N=" + std::to_string(p.n));
    if (!(p.u_stderr >= 0.0) || !std::isfinite(p.u_stderr))
      throw Error(ErrorCode::InvariantViolation, "stderr must be finite and non-negative at N=" + std::to_string(p.n));
  }
}

RecordFile read_records(std::istream& in) {
  RecordFile file;
  std::set<std::tuple<std::string, std::int64_t, std::int64_t, std::int64_t, std::int64_t>> seen;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (!have_header) {
      if (body.empty()) continue;
      if (body.front() == '#') {
        file.comments.emplace_back(text::trim(body.substr(1)));
        if (auto s = scale_from_comment(body.substr(1)); !s.empty()) file.scale = s;
        continue;
      }
      if (body != kRecordHeader)
        throw ParseError(ErrorCode::ParseError, line_no, 0, std::string("expected header '") + kRecordHeader + "'");
      have_header = true;
      continue;
    }
    if (body.empty()) continue;

    const auto cells = text::split(body, ',');
    if (cells.size() != 7)
      throw ParseError(ErrorCode::ParseError, line_no, 0, "expected 7 fields, found " + std::to_string(cells.size()));

    EnergyRecord r;
    r.dataset_id = std::string(text::trim(cells[0]));
    if (r.dataset_id.empty()) throw ParseError(ErrorCode::ParseError, line_no, 1, "empty dataset_id");
    r.sample_size = int_field(cells[1], line_no, 2, "sample_size");
    r.boot_index = int_field(cells[2], line_no, 3, "boot_index");
    r.fold_index = int_field(cells[3], line_no, 4, "fold_index");
    r.seed_index = int_field(cells[4], line_no, 5, "seed_index");
    auto nll = text::parse_real(cells[5]);
    if (!nll) throw ParseError(ErrorCode::ParseError, line_no, 6, "nll_sum is not a real number: '" +
                                                                       std::string(text::trim(cells[5])) + "'");
    r.nll_sum = *nll;
    r.heldout_count = int_field(cells[6], line_no, 7, "heldout_count");

    if (r.sample_size < 2) throw ParseError(ErrorCode::InvariantViolation, line_no, 2, "sample_size must be >= 2");
    if (r.boot_index < 0) throw ParseError(ErrorCode::InvariantViolation, line_no, 3, "boot_index must be >= 0");
    if (r.fold_index < 0) throw ParseError(ErrorCode::InvariantViolation, line_no, 4, "fold_index must be >= 0");
    if (r.seed_index < 0) throw ParseError(ErrorCode::InvariantViolation, line_no, 5, "seed_index must be >= 0");
    if (!std::isfinite(r.nll_sum)) throw ParseError(ErrorCode::InvariantViolation, line_no, 6, "nll_sum must be finite");
    if (r.heldout_count < 1) throw ParseError(ErrorCode::InvariantViolation, line_no, 7, "heldout_count must be >= 1");

    const auto key = std::make_tuple(r.dataset_id, r.sample_size, r.boot_index, r.fold_index, r.seed_index);
    if (!seen.insert(key).second) {
      std::ostringstream s;
      s << "duplicate (N, i, j, l) = (" << r.sample_size << ", " << r.boot_index << ", " << r.fold_index << ", "
        << r.seed_index << ") for dataset '" << r.dataset_id << "'";
      throw ParseError(ErrorCode::DuplicateKey, line_no, 0, s.str());
    }
    file.records.push_back(std::move(r));
  }
  if (!have_header) throw ParseError(ErrorCode::ParseError, line_no, 0, "missing record header");
  return file;
}

RecordFile ingest_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open record file " + path.string());
  return read_records(in);
}

void write_records(std::ostream& out, const std::vector<EnergyRecord>& records,
                   const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << r.dataset_id << ',' << r.sample_size << ',' << r.boot_index << ',' << r.fold_index << ','
        << r.seed_index << ',' << text::format_real(r.nll_sum) << ',' << r.heldout_count << '\n';
  }
}

EnergyCurve read_curve(std::istream& in) {
  EnergyCurve curve;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    if (!have_header) {
      if (body.front() == '#') {
        if (auto s = scale_from_comment(body.substr(1)); !s.empty()) curve.scale = s;
        continue;
      }
      if (body != kCurveHeader)
        throw ParseError(ErrorCode::ParseError, line_no, 0, std::string("expected header '") + kCurveHeader + "'");
      have_header = true;
      continue;
    }
    const auto cells = text::split(body, ',');
    if (cells.size() != 4)
      throw ParseError(ErrorCode::ParseError, line_no, 0, "expected 4 fields, found " + std::to_string(cells.size()));
    CurvePoint p;
    p.n = int_field(cells[0], line_no, 1, "sample_size");
    auto mean = text::parse_real(cells[1]);
    auto se = text::parse_real(cells[2]);
    if (!mean) throw ParseError(ErrorCode::ParseError, line_no, 2, "u_mean is not a real number");
    if (!se) throw ParseError(ErrorCode::ParseError, line_no, 3, "u_stderr is not a real number");
    p.u_mean = *mean;
    p.u_stderr = *se;
    p.record_count = static_cast<std::size_t>(int_field(cells[3], line_no, 4, "record_count"));
    curve.points.push_back(p);
  }
  if (!have_header) throw ParseError(ErrorCode::ParseError, line_no, 0, "missing curve header");
  curve.validate();
  return curve;
}

void write_curve(std::ostream& out, const EnergyCurve& curve, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "# scale=" << curve.scale << '\n';
  out << kCurveHeader << '\n';
  for (const auto& p : curve.points)
    out << p.n << ',' << text::format_real(p.u_mean) << ',' << text::format_real(p.u_stderr) << ',' << p.record_count
        << '\n';
}

EnergyCurve load_curve_or_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    break;
  }
  const bool is_curve = text::trim(line) == kCurveHeader;
  in.clear();
  in.seekg(0);
  if (is_curve) return read_curve(in);
  const auto file = read_records(in);
  auto curve = estimate_avg_energy(file.records);
  curve.scale = file.scale;
  return curve;
}

}  // namespace capmeter
