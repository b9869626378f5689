#include "glseg/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "glseg/core/csv.hpp"
#include "glseg/core/error.hpp"
#include "glseg/core/keyval.hpp"
#include "glseg/core/time.hpp"
#include "glseg/simd/kernels.hpp"

namespace glseg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::int64_t kForwardFillMinutes = 30;

const std::vector<std::string> kResources = {"ceiling_light", "desk_light",
                                             "ceiling_fan"};
const std::vector<std::string> kWeather = {"temperature", "humidity",
                                           "solar_radiation", "rain_rate"};

std::string exact_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_double_field(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == "null") {
    out = kNaN;
    return true;  // declared-missing sentinel
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size() || !std::isfinite(v)) return false;
    out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void log_error(IngestReport& report, std::size_t line, const std::string& column,
               const std::string& message) {
  if (report.errors.size() < IngestReport::max_logged_errors) {
    report.errors.push_back({line, column, message});
  }
}

struct ParsedRow {
  std::int64_t ts;
  std::string player;
  std::vector<double> feats;
  std::size_t line;
};

// Sort, enforce strictly increasing timestamps per player, forward-fill short
// gaps, and assemble the column store. Shared by both loaders. `bad_rows`
// counts type-coercion failures only; invariant violations are logged and
// dropped but never abort the load.
LoadResult finalize(std::vector<std::string> feature_names,
                    std::vector<ParsedRow> rows, IngestReport report,
                    std::size_t bad_rows, std::size_t total_rows,
                    bool check_usage_monotone) {
  std::stable_sort(rows.begin(), rows.end(), [](const ParsedRow& a, const ParsedRow& b) {
    if (a.player != b.player) return a.player < b.player;
    return a.ts < b.ts;
  });

  // Duplicate timestamps within a player: keep the first occurrence.
  {
    std::vector<ParsedRow> kept;
    kept.reserve(rows.size());
    for (auto& r : rows) {
      if (!kept.empty() && kept.back().player == r.player && kept.back().ts == r.ts) {
        log_error(report, r.line, "timestamp",
                  "duplicate timestamp within player " + r.player);
        continue;
      }
      kept.push_back(std::move(r));
    }
    rows.swap(kept);
  }

  if (check_usage_monotone) {
    std::vector<int> usage_cols;
    for (const std::string& res : kResources) {
      auto it = std::find(feature_names.begin(), feature_names.end(), "usage_" + res);
      usage_cols.push_back(it == feature_names.end()
                               ? -1
                               : static_cast<int>(it - feature_names.begin()));
    }
    std::vector<ParsedRow> kept;
    kept.reserve(rows.size());
    std::vector<double> last_usage(kResources.size(), -1.0);
    std::string cur_player;
    std::int64_t cur_day = std::numeric_limits<std::int64_t>::min();
    for (auto& r : rows) {
      const std::int64_t day = r.ts / 1440;
      if (r.player != cur_player || day != cur_day) {
        cur_player = r.player;
        cur_day = day;
        std::fill(last_usage.begin(), last_usage.end(), -1.0);
      }
      bool ok = true;
      for (std::size_t k = 0; k < usage_cols.size(); ++k) {
        if (usage_cols[k] < 0) continue;
        const double u = r.feats[usage_cols[k]];
        if (std::isnan(u)) continue;
        if (last_usage[k] >= 0.0 && u < last_usage[k] - 1e-9) {
          log_error(report, r.line, "usage_" + kResources[k],
                    "accumulated_usage decreases within a day (" +
                        std::to_string(u) + " after " +
                        std::to_string(last_usage[k]) + ")");
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      for (std::size_t k = 0; k < usage_cols.size(); ++k) {
        if (usage_cols[k] >= 0 && !std::isnan(r.feats[usage_cols[k]])) {
          last_usage[k] = r.feats[usage_cols[k]];
        }
      }
      kept.push_back(std::move(r));
    }
    rows.swap(kept);
  }

  report.total_rows = total_rows;
  if (total_rows > 0 && bad_rows * 20 > total_rows) {  // >5%
    fail(ErrorCode::validation,
         "aborting load: " + std::to_string(bad_rows) + " of " +
             std::to_string(total_rows) + " rows are unparseable (>5%); first error: " +
             (report.errors.empty() ? std::string("n/a")
                                    : report.errors.front().column + ": " +
                                          report.errors.front().message));
  }

  // Forward-fill missing cells from the same player within a short gap.
  const std::size_t S = feature_names.size();
  {
    std::vector<double> last_val(S, kNaN);
    std::vector<std::int64_t> last_ts(S, 0);
    std::string cur_player;
    for (auto& r : rows) {
      if (r.player != cur_player) {
        cur_player = r.player;
        std::fill(last_val.begin(), last_val.end(), kNaN);
      }
      for (std::size_t j = 0; j < S; ++j) {
        if (std::isnan(r.feats[j])) {
          if (!std::isnan(last_val[j]) && r.ts - last_ts[j] <= kForwardFillMinutes) {
            r.feats[j] = last_val[j];
            ++report.filled_values;
          }
        }
        if (!std::isnan(r.feats[j])) {
          last_val[j] = r.feats[j];
          last_ts[j] = r.ts;
        }
      }
    }
  }

  LoadResult out;
  Dataset& ds = out.dataset;
  ds.feature_names = std::move(feature_names);
  const int rank_col = [&] {
    auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), "rank");
    return it == ds.feature_names.end() ? -1
                                        : static_cast<int>(it - ds.feature_names.begin());
  }();
  ds.values.reserve(rows.size() * S);
  for (auto& r : rows) {
    ds.timestamps.push_back(r.ts);
    ds.player_ids.push_back(std::move(r.player));
    bool missing = false;
    for (double v : r.feats) {
      if (std::isnan(v)) missing = true;
    }
    ds.row_missing.push_back(missing ? 1 : 0);
    if (missing) ++report.missing_rows;
    int rank = -1;
    if (rank_col >= 0 && !std::isnan(r.feats[rank_col])) {
      rank = static_cast<int>(std::llround(r.feats[rank_col]));
    }
    ds.ranks.push_back(rank);
    ds.values.insert(ds.values.end(), r.feats.begin(), r.feats.end());
  }
  report.kept_rows = ds.rows();
  out.report = std::move(report);
  return out;
}

}  // namespace

const std::vector<std::string>& telemetry_features() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& r : kResources) v.push_back(r);
    for (const auto& r : kResources) v.push_back("usage_" + r);
    for (const auto& r : kResources) v.push_back("baseline_" + r);
    v.push_back("points");
    v.push_back("rank");
    v.push_back("portal_visits");
    for (const auto& w : kWeather) v.push_back(w);
    return v;
  }();
  return names;
}

const std::vector<std::string>& flag_features() {
  static const std::vector<std::string> names = {
      "morning", "afternoon", "evening", "weekday", "weekend",
      "break",   "midterm",   "final",   "holiday"};
  return names;
}

ColumnSchema ColumnSchema::from_file(const std::string& path) {
  ColumnSchema schema;
  const KeyVal kv = KeyVal::from_file(path);
  for (const auto& [k, v] : kv.entries()) schema.map[k] = v;
  return schema;
}

ColumnSchema ColumnSchema::identity() {
  ColumnSchema schema;
  schema.map["timestamp"] = "timestamp";
  schema.map["player_id"] = "player_id";
  for (const std::string& f : telemetry_features()) schema.map[f] = f;
  return schema;
}

int Dataset::feature_index(const std::string& name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<std::string> Dataset::distinct_players() const {
  std::set<std::string> s(player_ids.begin(), player_ids.end());
  return {s.begin(), s.end()};
}

LoadResult load_csv(const std::string& path, const ColumnSchema& schema) {
  const CsvTable table = read_csv(path);

  std::vector<std::string> logical = {"timestamp", "player_id"};
  for (const std::string& f : telemetry_features()) logical.push_back(f);

  std::vector<int> col_of;
  for (const std::string& name : logical) {
    auto it = schema.map.find(name);
    if (it == schema.map.end()) {
      fail(ErrorCode::schema, "schema file does not map required column '" + name + "'");
    }
    const int c = table.column(it->second);
    if (c < 0) {
      fail(ErrorCode::schema, "required column '" + name + "' (header '" + it->second +
                                  "') not present in " + path);
    }
    col_of.push_back(c);
  }

  const std::vector<std::string>& features = telemetry_features();
  IngestReport report;
  std::vector<ParsedRow> rows;
  rows.reserve(table.rows.size());
  std::size_t bad_rows = 0;

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& raw = table.rows[i];
    const std::size_t line = i + 2;  // after header
    if (raw.size() < table.header.size()) {
      log_error(report, line, "", "row has too few fields");
      ++bad_rows;
      continue;
    }

    ParsedRow row;
    row.line = line;
    bool ok = true;
    try {
      row.ts = parse_timestamp(trim(raw[col_of[0]]));
    } catch (const Error& e) {
      log_error(report, line, "timestamp", e.what());
      ok = false;
    }
    row.player = trim(raw[col_of[1]]);
    if (ok && row.player.empty()) {
      log_error(report, line, "player_id", "empty player id");
      ok = false;
    }

    row.feats.resize(features.size(), kNaN);
    for (std::size_t j = 0; ok && j < features.size(); ++j) {
      double v;
      if (!parse_double_field(raw[col_of[2 + j]], v)) {
        log_error(report, line, features[j],
                  "cannot parse value '" + raw[col_of[2 + j]] + "'");
        ok = false;
        break;
      }
      row.feats[j] = v;
    }
    if (!ok) {
      ++bad_rows;  // only type-coercion failures count toward the 5% abort
      continue;
    }

    // RawRecord invariants; violations are logged and the row dropped.
    bool valid = true;
    for (std::size_t k = 0; valid && k < kResources.size(); ++k) {
      const double st = row.feats[k];
      if (!std::isnan(st) && st != 0.0 && st != 1.0) {
        log_error(report, line, kResources[k], "resource_status must be in {0,1}");
        valid = false;
      }
      const double usage = row.feats[kResources.size() + k];
      if (valid && !std::isnan(usage) && usage < 0.0) {
        log_error(report, line, "usage_" + kResources[k],
                  "accumulated_usage must be non-negative");
        valid = false;
      }
      const double base = row.feats[2 * kResources.size() + k];
      if (valid && !std::isnan(base) && base <= 0.0) {
        log_error(report, line, "baseline_" + kResources[k], "baseline must be positive");
        valid = false;
      }
    }
    const double points = row.feats[9];
    if (valid && !std::isnan(points) && points < 0.0) {
      log_error(report, line, "points", "points must be non-negative");
      valid = false;
    }
    const double rank = row.feats[10];
    if (valid && !std::isnan(rank) && (rank < 1.0 || rank != std::floor(rank))) {
      log_error(report, line, "rank", "rank must be an integer >= 1");
      valid = false;
    }
    const double visits = row.feats[11];
    if (valid && !std::isnan(visits) && (visits < 0.0 || visits != std::floor(visits))) {
      log_error(report, line, "portal_visits",
                "portal_visits must be a non-negative integer");
      valid = false;
    }
    if (!valid) continue;
    rows.push_back(std::move(row));
  }

  return finalize(features, std::move(rows), std::move(report), bad_rows,
                  table.rows.size(), /*check_usage_monotone=*/true);
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write dataset CSV: " + path);
  std::vector<std::string> header = {"timestamp", "player_id"};
  header.insert(header.end(), ds.feature_names.begin(), ds.feature_names.end());
  write_csv_row(out, header);
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    fields.clear();
    fields.push_back(format_timestamp(ds.timestamps[i]));
    fields.push_back(ds.player_ids[i]);
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
      const double v = ds.at(i, j);
      fields.push_back(std::isnan(v) ? "" : exact_double(v));
    }
    write_csv_row(out, fields);
  }
}

LoadResult load_normalized_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int ts_col = table.column("timestamp");
  const int player_col = table.column("player_id");
  if (ts_col < 0 || player_col < 0) {
    fail(ErrorCode::schema, "normalized CSV needs 'timestamp' and 'player_id' columns: " + path);
  }
  std::vector<std::string> features;
  std::vector<int> feat_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) == ts_col || static_cast<int>(c) == player_col) continue;
    features.push_back(table.header[c]);
    feat_cols.push_back(static_cast<int>(c));
  }
  if (features.empty()) fail(ErrorCode::schema, "normalized CSV has no feature columns");

  IngestReport report;
  std::vector<ParsedRow> rows;
  std::size_t bad_rows = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& raw = table.rows[i];
    const std::size_t line = i + 2;
    ParsedRow row;
    row.line = line;
    bool ok = true;
    try {
      row.ts = parse_timestamp(trim(raw[ts_col]));
    } catch (const Error& e) {
      log_error(report, line, "timestamp", e.what());
      ok = false;
    }
    if (ok) {
      row.player = trim(raw[player_col]);
      if (row.player.empty()) {
        log_error(report, line, "player_id", "empty player id");
        ok = false;
      }
    }
    row.feats.resize(features.size(), kNaN);
    for (std::size_t j = 0; ok && j < features.size(); ++j) {
      if (!parse_double_field(raw[feat_cols[j]], row.feats[j])) {
        log_error(report, line, features[j],
                  "cannot parse value '" + raw[feat_cols[j]] + "'");
        ok = false;
      }
    }
    if (!ok) {
      ++bad_rows;
      continue;
    }
    rows.push_back(std::move(row));
  }
  return finalize(std::move(features), std::move(rows), std::move(report), bad_rows,
                  table.rows.size(), /*check_usage_monotone=*/false);
}

Dataset derive_flags(const Dataset& ds, const AcademicCalendar& calendar) {
  Dataset out = ds;
  const auto& flags = flag_features();

  // Replace any existing flag columns so the operation is idempotent.
  std::vector<std::size_t> flag_col(flags.size());
  std::vector<std::string> names = ds.feature_names;
  for (std::size_t f = 0; f < flags.size(); ++f) {
    const int e = ds.feature_index(flags[f]);
    if (e >= 0) {
      flag_col[f] = static_cast<std::size_t>(e);
    } else {
      flag_col[f] = names.size();
      names.push_back(flags[f]);
    }
  }

  const std::size_t S_old = ds.n_features();
  const std::size_t S_new = names.size();
  std::vector<double> values(ds.rows() * S_new);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    for (std::size_t j = 0; j < S_old; ++j) values[i * S_new + j] = ds.at(i, j);

    const std::int64_t ts = ds.timestamps[i];
    const int minute_of_day = static_cast<int>(((ts % 1440) + 1440) % 1440);
    const std::int64_t day = (ts - minute_of_day) / 1440;
    const int dow = day_of_week(ts);

    double flag_vals[9] = {};
    // Day parts: morning [06:00,12:00), afternoon [12:00,18:00),
    // evening [18:00,24:00); [00:00,06:00) sets none of the three.
    flag_vals[0] = (minute_of_day >= 360 && minute_of_day < 720) ? 1.0 : 0.0;
    flag_vals[1] = (minute_of_day >= 720 && minute_of_day < 1080) ? 1.0 : 0.0;
    flag_vals[2] = (minute_of_day >= 1080) ? 1.0 : 0.0;
    flag_vals[3] = (dow < 5) ? 1.0 : 0.0;
    flag_vals[4] = (dow >= 5) ? 1.0 : 0.0;
    flag_vals[5] = calendar.contains(AcademicCalendar::brk, day) ? 1.0 : 0.0;
    flag_vals[6] = calendar.contains(AcademicCalendar::midterm, day) ? 1.0 : 0.0;
    flag_vals[7] = calendar.contains(AcademicCalendar::final, day) ? 1.0 : 0.0;
    flag_vals[8] = calendar.contains(AcademicCalendar::holiday, day) ? 1.0 : 0.0;

    for (std::size_t f = 0; f < flags.size(); ++f) {
      values[i * S_new + flag_col[f]] = flag_vals[f];
    }
  }
  out.feature_names = std::move(names);
  out.values = std::move(values);
  return out;
}

namespace {

FeatureMatrix standardize_impl(const std::vector<std::string>& labels,
                               std::vector<std::vector<double>> cols,
                               std::vector<std::size_t> row_ids) {
  const std::size_t n = cols.empty() ? 0 : cols[0].size();
  if (n < 2) fail(ErrorCode::validation, "standardize needs at least 2 usable rows");

  FeatureMatrix fm;
  fm.n = n;
  fm.row_ids = std::move(row_ids);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    auto& col = cols[j];
    const double mean = simd::sum(col) / static_cast<double>(n);
    simd::affine(col, 1.0, -mean);
    const double var = simd::sumsq(col) / static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      fm.dropped_constant.push_back(labels[j]);
      continue;
    }
    simd::affine(col, 1.0 / sd, 0.0);
    fm.labels.push_back(labels[j]);
    fm.means.push_back(mean);
    fm.stds.push_back(sd);
    fm.data.insert(fm.data.end(), col.begin(), col.end());
  }
  if (fm.labels.empty()) {
    fail(ErrorCode::degenerate, "all requested columns are constant");
  }
  return fm;
}

}  // namespace

int FeatureMatrix::label_index(const std::string& name) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == name) return static_cast<int>(i);
  }
  return -1;
}

FeatureMatrix FeatureMatrix::take_rows(std::span<const std::size_t> keep) const {
  FeatureMatrix out;
  out.labels = labels;
  out.n = keep.size();
  out.means = means;
  out.stds = stds;
  out.data.resize(keep.size() * cols());
  for (std::size_t j = 0; j < cols(); ++j) {
    const auto src = col(j);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      out.data[j * keep.size() + i] = src[keep[i]];
    }
  }
  for (std::size_t i : keep) {
    out.row_ids.push_back(i < row_ids.size() ? row_ids[i] : i);
  }
  return out;
}

FeatureMatrix standardize(const Dataset& ds, const std::vector<std::string>& columns) {
  std::vector<int> idx;
  for (const std::string& name : columns) {
    const int j = ds.feature_index(name);
    if (j < 0) fail(ErrorCode::schema, "unknown feature column: " + name);
    idx.push_back(j);
  }
  std::vector<std::size_t> keep_rows;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (!ds.row_missing[i]) keep_rows.push_back(i);
  }
  std::vector<std::vector<double>> cols(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    cols[j].reserve(keep_rows.size());
    for (std::size_t i : keep_rows) cols[j].push_back(ds.at(i, idx[j]));
  }
  return standardize_impl(columns, std::move(cols), std::move(keep_rows));
}

FeatureMatrix standardize_columns(const std::vector<std::string>& labels,
                                  const std::vector<std::vector<double>>& cols) {
  std::vector<std::size_t> ids(cols.empty() ? 0 : cols[0].size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return standardize_impl(labels, cols, std::move(ids));
}

}  // namespace glseg
