#pragma once

// Held-out loss records and the averaged energy curve, plus their text formats.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace capmeter {

// One held-out fold evaluation: summed per-example NLL for a model trained on a
// bootstrap sample of size N.
struct EnergyRecord {
  std::string dataset_id;
  std::int64_t sample_size = 0;
  std::int64_t boot_index = 0;
  std::int64_t fold_index = 0;
  std::int64_t seed_index = 0;
  double nll_sum = 0.0;
  std::int64_t heldout_count = 0;

  bool operator==(const EnergyRecord&) const = default;
};

inline constexpr const char* kRecordHeader =
    "dataset_id,sample_size,boot_index,fold_index,seed_index,nll_sum,heldout_count";

// Energy scales never mixed in one fit.
inline constexpr const char* kScaleNll = "nll";
inline constexpr const char* kScaleProbComplement = "probability-complement";

struct CurvePoint {
  std::int64_t n = 0;
  double u_mean = 0.0;
  double u_stderr = 0.0;
  std::size_t record_count = 0;

  bool operator==(const CurvePoint&) const = default;
};

// Averaged energy indexed by strictly increasing N.
struct EnergyCurve {
  std::vector<CurvePoint> points;
  std::string scale = kScaleNll;

  void validate() const;
  std::int64_t n_min() const { return points.front().n; }
  std::int64_t n_max() const { return points.back().n; }
};

struct RecordFile {
  std::vector<EnergyRecord> records;
  std::vector<std::string> comments;  // '#' lines before the header, without the '#'
  std::string scale = kScaleNll;      // from a "scale=<name>" comment, if any
};

// Strict reader: exact header, '#' comments only before it, every field validated.
// Throws ParseError (line, column), InvariantViolation or DuplicateKey.
RecordFile read_records(std::istream& in);
RecordFile ingest_records(const std::filesystem::path& path);

void write_records(std::ostream& out, const std::vector<EnergyRecord>& records,
                   const std::vector<std::string>& comments = {});

inline constexpr const char* kCurveHeader = "sample_size,u_mean,u_stderr,record_count";

EnergyCurve read_curve(std::istream& in);
void write_curve(std::ostream& out, const EnergyCurve& curve, const std::vector<std::string>& comments = {});

// Accepts either a record file (aggregated on load) or a curve file.
EnergyCurve load_curve_or_records(const std::filesystem::path& path);

}  // namespace capmeter
