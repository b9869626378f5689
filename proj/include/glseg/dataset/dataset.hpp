#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "glseg/dataset/calendar.hpp"

namespace glseg {

// Canonical telemetry feature columns, in emission order. "points" and
// "rank" are ordinary features here; the clustering stage drops them by name.
const std::vector<std::string>& telemetry_features();
// The nine derived calendar flags, in emission order.
const std::vector<std::string>& flag_features();

// Logical column -> CSV header mapping read from a key=value schema file.
struct ColumnSchema {
  std::map<std::string, std::string> map;

  static ColumnSchema from_file(const std::string& path);
  static ColumnSchema identity();  // logical names used as headers
};

struct RowError {
  std::size_t line;     // 1-based line in the source file
  std::string column;
  std::string message;
};

struct IngestReport {
  std::size_t total_rows = 0;
  std::size_t kept_rows = 0;
  std::size_t filled_values = 0;   // forward-filled cells
  std::size_t missing_rows = 0;    // rows excluded from analysis
  std::vector<RowError> errors;    // capped at max_logged_errors
  std::vector<std::string> notes;

  static constexpr std::size_t max_logged_errors = 100;
};

// Column store for validated, sorted telemetry (or synthetic) records.
// Immutable once built; every operation below returns a new object.
class Dataset {
 public:
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> timestamps;    // minutes, sorted within player
  std::vector<std::string> player_ids;
  std::vector<int> ranks;
  std::vector<double> values;              // row-major rows() x features
  std::vector<std::uint8_t> row_missing;   // excluded from matrix construction

  std::size_t rows() const { return timestamps.size(); }
  std::size_t n_features() const { return feature_names.size(); }
  double at(std::size_t row, std::size_t col) const {
    return values[row * feature_names.size() + col];
  }
  int feature_index(const std::string& name) const;  // -1 if absent
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * feature_names.size(), feature_names.size()};
  }
  std::vector<std::string> distinct_players() const;
};

struct LoadResult {
  Dataset dataset;
  IngestReport report;
};

// Telemetry ingestion: validates RawRecord invariants row by row, sorts by
// (player, timestamp), forward-fills short gaps. Aborts (Error) on a missing
// file, a missing schema column, or >5% unparseable rows.
LoadResult load_csv(const std::string& path, const ColumnSchema& schema);

// Normalized round-trip format: timestamp,player_id,rank,<features...>.
void write_csv(const Dataset& ds, const std::string& path);
LoadResult load_normalized_csv(const std::string& path);

// Adds the nine calendar flags as feature columns (replacing them if present).
Dataset derive_flags(const Dataset& ds, const AcademicCalendar& calendar);

// Standardized N x S observation matrix, column-major so each vertex's
// samples are contiguous.
struct FeatureMatrix {
  std::vector<std::string> labels;
  std::size_t n = 0;
  std::vector<double> data;                 // column j at [j*n, (j+1)*n)
  std::vector<double> means;                // pre-standardization stats
  std::vector<double> stds;                 // population convention (1/N)
  std::vector<std::string> dropped_constant;
  std::vector<std::size_t> row_ids;         // source dataset row per matrix row

  std::size_t cols() const { return labels.size(); }
  std::span<const double> col(std::size_t j) const { return {data.data() + j * n, n}; }
  std::span<double> col(std::size_t j) { return {data.data() + j * n, n}; }
  int label_index(const std::string& name) const;

  // Rows restricted to `keep` (matrix-row indices), same labels, NOT
  // re-standardized.
  FeatureMatrix take_rows(std::span<const std::size_t> keep) const;
};

// Z-scores the named columns over rows not flagged missing. Constant columns
// are dropped and reported; all-constant input is an error.
FeatureMatrix standardize(const Dataset& ds, const std::vector<std::string>& columns);

// Same, over explicit column data (tests and per-group refits).
FeatureMatrix standardize_columns(const std::vector<std::string>& labels,
                                  const std::vector<std::vector<double>>& cols);

}  // namespace glseg
