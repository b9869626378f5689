#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "glseg/core/error.hpp"
#include "glseg/core/keyval.hpp"
#include "glseg/core/linalg.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/core/time.hpp"
#include "glseg/dataset/dataset.hpp"
#include "glseg/dataset/synthetic.hpp"

using namespace glseg;
namespace fs = std::filesystem;

namespace {

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / "glseg_dataset_tests";
  fs::create_directories(p);
  return p;
}

// One telemetry CSV row with sane defaults; override any column by header.
std::string telemetry_row(const std::string& ts, const std::string& player, int rank,
                          const std::map<std::string, std::string>& over = {}) {
  std::map<std::string, std::string> v = {
      {"timestamp", ts},       {"player_id", player},
      {"ceiling_light", "1"},  {"desk_light", "0"},
      {"ceiling_fan", "1"},    {"usage_ceiling_light", "10"},
      {"usage_desk_light", "5"}, {"usage_ceiling_fan", "20"},
      {"baseline_ceiling_light", "120"}, {"baseline_desk_light", "60"},
      {"baseline_ceiling_fan", "240"},   {"points", "100"},
      {"rank", std::to_string(rank)},    {"portal_visits", "3"},
      {"temperature", "30.5"}, {"humidity", "70"},
      {"solar_radiation", "500"}, {"rain_rate", "0"}};
  for (const auto& [k, val] : over) v[k] = val;
  std::string row;
  row += v["timestamp"] + "," + v["player_id"];
  for (const std::string& f : telemetry_features()) row += "," + v[f];
  return row + "\n";
}

std::string telemetry_header() {
  std::string h = "timestamp,player_id";
  for (const std::string& f : telemetry_features()) h += "," + f;
  return h + "\n";
}

std::string write_file(const std::string& name, const std::string& content) {
  const fs::path p = temp_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

std::string schema_file() {
  std::string body = "timestamp=timestamp\nplayer_id=player_id\n";
  for (const std::string& f : telemetry_features()) body += f + "=" + f + "\n";
  return write_file("schema.cfg", body);
}

}  // namespace

TEST_CASE("load_csv keeps well-formed rows sorted by player and time") {
  const std::string csv = telemetry_header() +
                          telemetry_row("2017-09-12T08:31", "p2", 2) +
                          telemetry_row("2017-09-12T08:30", "p1", 1) +
                          telemetry_row("2017-09-12T08:30", "p2", 2);
  const LoadResult lr =
      load_csv(write_file("ok.csv", csv), ColumnSchema::from_file(schema_file()));
  REQUIRE(lr.dataset.rows() == 3);
  CHECK(lr.report.errors.empty());
  CHECK(lr.dataset.player_ids == std::vector<std::string>{"p1", "p2", "p2"});
  CHECK(lr.dataset.timestamps[1] < lr.dataset.timestamps[2]);
  CHECK(lr.dataset.ranks == std::vector<int>{1, 2, 2});
  CHECK(lr.dataset.feature_names == telemetry_features());
}

TEST_CASE("schema errors name the missing column") {
  std::string body = "timestamp=timestamp\nplayer_id=player_id\n";
  for (const std::string& f : telemetry_features()) {
    if (f != "rank") body += f + "=" + f + "\n";
  }
  const std::string schema = write_file("norank.cfg", body);
  const std::string csv = telemetry_header() + telemetry_row("2017-09-12T08:30", "p1", 1);
  try {
    (void)load_csv(write_file("ok2.csv", csv), ColumnSchema::from_file(schema));
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::schema);
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
  CHECK_THROWS_AS((void)load_csv("/nonexistent.csv", ColumnSchema::identity()), Error);
}

TEST_CASE("status outside {0,1} is a row-level validation error") {
  std::string csv = telemetry_header();
  for (int i = 0; i < 24; ++i) {
    csv += telemetry_row("2017-09-12T08:" + std::string(i < 10 ? "0" : "") +
                             std::to_string(i),
                         "p1", 1);
  }
  csv += telemetry_row("2017-09-12T09:00", "p1", 1, {{"ceiling_fan", "2"}});
  const LoadResult lr = load_csv(write_file("badstatus.csv", csv),
                                 ColumnSchema::from_file(schema_file()));
  CHECK(lr.dataset.rows() == 24);  // offending row dropped, not silently kept
  REQUIRE(lr.report.errors.size() == 1);
  CHECK(lr.report.errors[0].column == "ceiling_fan");
  CHECK(lr.report.errors[0].message.find("{0,1}") != std::string::npos);
}

TEST_CASE("more than 5% unparseable rows aborts with a summary") {
  std::string csv = telemetry_header();
  for (int i = 0; i < 8; ++i) {
    csv += telemetry_row("2017-09-12T08:0" + std::to_string(i), "p1", 1);
  }
  csv += telemetry_row("2017-09-12T09:00", "p1", 1, {{"humidity", "wet"}});
  try {
    (void)load_csv(write_file("badparse.csv", csv), ColumnSchema::from_file(schema_file()));
    FAIL("expected abort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::validation);
    CHECK(std::string(e.what()).find(">5%") != std::string::npos);
  }
}

TEST_CASE("decreasing accumulated usage within a day drops the row") {
  std::string csv = telemetry_header();
  csv += telemetry_row("2017-09-12T08:00", "p1", 1, {{"usage_ceiling_fan", "20"}});
  csv += telemetry_row("2017-09-12T08:01", "p1", 1, {{"usage_ceiling_fan", "15"}});
  csv += telemetry_row("2017-09-13T00:01", "p1", 1, {{"usage_ceiling_fan", "0"}});  // new day
  const LoadResult lr = load_csv(write_file("usage.csv", csv),
                                 ColumnSchema::from_file(schema_file()));
  CHECK(lr.dataset.rows() == 2);
  REQUIRE(lr.report.errors.size() == 1);
  CHECK(lr.report.errors[0].column == "usage_ceiling_fan");
}

TEST_CASE("derive_flags matches the day-part and calendar rules") {
  const AcademicCalendar cal = AcademicCalendar::from_string(
      "final=2017-09-16..2017-09-22\nbreak=2017-10-01..2017-10-07\n");
  const std::string csv = telemetry_header() +
                          telemetry_row("2017-09-12T08:30", "p1", 1) +  // Tue morning
                          telemetry_row("2017-09-13T00:00", "p1", 1) +  // midnight
                          telemetry_row("2017-09-16T19:00", "p1", 1);   // Sat final
  const LoadResult lr = load_csv(write_file("flags.csv", csv),
                                 ColumnSchema::from_file(schema_file()));
  const Dataset ds = derive_flags(lr.dataset, cal);

  auto flag = [&](std::size_t row, const std::string& name) {
    return ds.at(row, static_cast<std::size_t>(ds.feature_index(name)));
  };
  // Tuesday 08:30 outside every range.
  CHECK(flag(0, "morning") == 1);
  CHECK(flag(0, "afternoon") == 0);
  CHECK(flag(0, "evening") == 0);
  CHECK(flag(0, "weekday") == 1);
  CHECK(flag(0, "weekend") == 0);
  for (const char* f : {"break", "midterm", "final", "holiday"}) CHECK(flag(0, f) == 0);
  // Midnight: the night bucket sets none of the three day parts.
  CHECK(flag(1, "morning") == 0);
  CHECK(flag(1, "afternoon") == 0);
  CHECK(flag(1, "evening") == 0);
  // Saturday 19:00 inside the final range.
  CHECK(flag(2, "weekend") == 1);
  CHECK(flag(2, "final") == 1);
  CHECK(flag(2, "evening") == 1);

  CHECK_THROWS_AS(
      (void)AcademicCalendar::from_string("break=2017-10-01..2017-10-07\n"
                                          "break=2017-10-05..2017-10-09\n"),
      Error);
}

TEST_CASE("flag sums obey the day-part and week partition") {
  const AcademicCalendar cal = AcademicCalendar::from_string("");
  std::string csv = telemetry_header();
  Rng rng(99);
  std::set<std::int64_t> seen;
  const std::int64_t base = parse_timestamp("2017-09-12T00:00");
  for (int i = 0; i < 200; ++i) {
    const std::int64_t ts = base + static_cast<std::int64_t>(rng.below(60 * 24 * 40));
    if (!seen.insert(ts).second) continue;
    csv += telemetry_row(format_timestamp(ts), "p1", 1);
  }
  const LoadResult lr = load_csv(write_file("flagsums.csv", csv),
                                 ColumnSchema::from_file(schema_file()));
  const Dataset ds = derive_flags(lr.dataset, cal);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const double dayparts = ds.at(i, ds.feature_index("morning")) +
                            ds.at(i, ds.feature_index("afternoon")) +
                            ds.at(i, ds.feature_index("evening"));
    CHECK((dayparts == 0.0 || dayparts == 1.0));
    CHECK(ds.at(i, ds.feature_index("weekday")) +
              ds.at(i, ds.feature_index("weekend")) ==
          1.0);
  }
  // Idempotent on a dataset that already carries flags.
  const Dataset twice = derive_flags(ds, cal);
  CHECK(twice.feature_names == ds.feature_names);
  CHECK(twice.values == ds.values);
}

TEST_CASE("standardize matches the population-std oracle") {
  const FeatureMatrix fm = standardize_columns({"x"}, {{1.0, 2.0, 3.0}});
  REQUIRE(fm.cols() == 1);
  // [1,2,3]: mean 2, population std sqrt(2/3).
  const double expected = 1.0 / std::sqrt(2.0 / 3.0);
  CHECK(close(fm.col(0)[0], -expected, 1e-12));
  CHECK(close(fm.col(0)[0], -1.2247448714, 1e-9));
  CHECK(close(fm.col(0)[1], 0.0, 1e-12));
  CHECK(close(fm.col(0)[2], expected, 1e-12));

  // Idempotence: standardizing standardized data changes nothing.
  std::vector<double> col(fm.col(0).begin(), fm.col(0).end());
  const FeatureMatrix fm2 = standardize_columns({"x"}, {col});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(close(fm2.col(0)[i], fm.col(0)[i], 1e-10));
  }

  // Constant columns are excluded and reported.
  const FeatureMatrix fm3 =
      standardize_columns({"c", "x"}, {{5.0, 5.0, 5.0}, {1.0, 2.0, 3.0}});
  CHECK(fm3.cols() == 1);
  CHECK(fm3.dropped_constant == std::vector<std::string>{"c"});

  CHECK_THROWS_AS((void)standardize_columns({"c"}, {{5.0, 5.0, 5.0}}), Error);
  CHECK_THROWS_AS((void)standardize_columns({"x"}, {{1.0}}), Error);
}

TEST_CASE("standardized columns have zero mean and unit std for any input") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(500);
    std::vector<double> col(n);
    const double scale = std::exp(rng.uniform(-3, 3));
    const double shift = rng.uniform(-100, 100);
    for (double& v : col) v = shift + scale * rng.normal();
    double lo = col[0], hi = col[0];
    for (double v : col) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-9) continue;  // skip the rare collapsed draw
    const FeatureMatrix fm = standardize_columns({"x"}, {col});
    double mean = 0, var = 0;
    for (double v : fm.col(0)) mean += v;
    mean /= static_cast<double>(n);
    for (double v : fm.col(0)) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-8);
    for (double v : fm.col(0)) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("missing values forward-fill within 30 minutes, else the row drops") {
  std::string csv = telemetry_header();
  csv += telemetry_row("2017-09-12T08:00", "p1", 1,
                       {{"humidity", "55"}, {"temperature", "29"}});
  csv += telemetry_row("2017-09-12T08:20", "p1", 1,
                       {{"humidity", ""}, {"temperature", "31"}});           // fillable
  csv += telemetry_row("2017-09-12T09:30", "p1", 1, {{"humidity", "NA"}});   // gap too wide
  const LoadResult lr = load_csv(write_file("missing.csv", csv),
                                 ColumnSchema::from_file(schema_file()));
  REQUIRE(lr.dataset.rows() == 3);
  CHECK(lr.report.filled_values == 1);
  CHECK(lr.dataset.at(1, lr.dataset.feature_index("humidity")) == 55.0);
  CHECK(lr.report.missing_rows == 1);
  CHECK(lr.dataset.row_missing[2] == 1);

  // Missing rows are excluded from matrix construction.
  const FeatureMatrix fm = standardize(lr.dataset, {"humidity", "temperature"});
  CHECK(fm.n == 2);
  CHECK(fm.dropped_constant == std::vector<std::string>{"humidity"});
}

TEST_CASE("write_csv then load is the identity within float round-trip") {
  const std::string csv = telemetry_header() +
                          telemetry_row("2017-09-12T08:30", "p1", 1,
                                        {{"temperature", "30.123456789012345"}}) +
                          telemetry_row("2017-09-12T08:31", "p1", 1) +
                          telemetry_row("2017-09-12T08:30", "p2", 7);
  const LoadResult orig =
      load_csv(write_file("rt.csv", csv), ColumnSchema::from_file(schema_file()));
  const std::string out = (temp_dir() / "rt_out.csv").string();
  write_csv(orig.dataset, out);
  const LoadResult back = load_normalized_csv(out);
  REQUIRE(back.dataset.rows() == orig.dataset.rows());
  CHECK(back.dataset.feature_names == orig.dataset.feature_names);
  CHECK(back.dataset.player_ids == orig.dataset.player_ids);
  CHECK(back.dataset.timestamps == orig.dataset.timestamps);
  CHECK(back.dataset.ranks == orig.dataset.ranks);
  for (std::size_t i = 0; i < orig.dataset.values.size(); ++i) {
    CHECK(close(back.dataset.values[i], orig.dataset.values[i],
                1e-12 * std::max(1.0, std::abs(orig.dataset.values[i]))));
  }
}

TEST_CASE("synthetic generation is bit-deterministic") {
  SynthConfig cfg;
  cfg.n_features = 6;
  cfg.n_rows = 300;
  cfg.k = 3;
  cfg.players = 6;
  cfg.channels = {{"f0", "f1", 0.8}, {"f2", "f3", 0.0}};
  const SynthResult a = generate_synthetic(cfg, 99);
  const SynthResult b = generate_synthetic(cfg, 99);
  CHECK(a.dataset.values == b.dataset.values);  // bit-identical
  CHECK(a.dataset.player_ids == b.dataset.player_ids);
  CHECK(a.dataset.timestamps == b.dataset.timestamps);

  // Channels with b=0 are not part of the ground truth.
  REQUIRE(a.truth.channels.size() == 1);
  CHECK(a.truth.channels[0].cause == "f0");
  CHECK(a.truth.channels[0].effect == "f1");

  const SynthResult c = generate_synthetic(cfg, 100);
  CHECK(a.dataset.values != c.dataset.values);

  // Round trip through the normalized CSV is exact (%.17g).
  const std::string out = (temp_dir() / "synth_rt.csv").string();
  write_csv(a.dataset, out);
  const LoadResult back = load_normalized_csv(out);
  CHECK(back.dataset.feature_names == a.dataset.feature_names);
  CHECK(back.dataset.values == a.dataset.values);
}

TEST_CASE("chain precision matrix is recovered empirically") {
  SynthConfig cfg;
  cfg.n_features = 10;
  cfg.n_rows = 2000;
  cfg.k = 1;
  cfg.players = 4;
  cfg.edge_weight = 0.4;
  const SynthResult sr = generate_synthetic(cfg, 7);
  REQUIRE(sr.truth.support.size() == 9);

  const std::size_t S = cfg.n_features;
  const std::size_t N = sr.dataset.rows();
  Mat cov(S, S);
  std::vector<double> mean(S, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < S; ++j) mean[j] += sr.dataset.at(i, j);
  }
  for (double& m : mean) m /= static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t a2 = 0; a2 < S; ++a2) {
      for (std::size_t b2 = 0; b2 <= a2; ++b2) {
        cov.at(a2, b2) +=
            (sr.dataset.at(i, a2) - mean[a2]) * (sr.dataset.at(i, b2) - mean[b2]);
      }
    }
  }
  for (std::size_t a2 = 0; a2 < S; ++a2) {
    for (std::size_t b2 = 0; b2 <= a2; ++b2) {
      cov.at(a2, b2) /= static_cast<double>(N);
      cov.at(b2, a2) = cov.at(a2, b2);
    }
  }
  const Mat prec = spd_inverse(cov);
  std::set<std::pair<std::size_t, std::size_t>> chain(sr.truth.support.begin(),
                                                      sr.truth.support.end());
  for (std::size_t a2 = 0; a2 < S; ++a2) {
    for (std::size_t b2 = a2 + 1; b2 < S; ++b2) {
      const double rho = -prec.at(a2, b2) / std::sqrt(prec.at(a2, a2) * prec.at(b2, b2));
      if (chain.count({a2, b2})) {
        CHECK(std::abs(rho) > 0.3);  // planted 0.4 within sampling noise
      } else {
        CHECK(std::abs(rho) < 0.12);
      }
    }
  }
}

TEST_CASE("non-positive-definite precision requests are rejected") {
  SynthConfig cfg;
  cfg.n_features = 8;
  cfg.n_rows = 100;
  cfg.edge_weight = 0.6;  // tridiagonal 1/-0.6 is indefinite
  try {
    (void)generate_synthetic(cfg, 1);
    FAIL("expected non-PD error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric);
    CHECK(std::string(e.what()).find("positive definite") != std::string::npos);
  }
}

TEST_CASE("synth config parses the documented keys") {
  const SynthConfig cfg = SynthConfig::from_keyval(KeyVal::from_string(
      "S=12\nN=500\nk=3\nplayers=9\nsupport=random(0.2)\nrho=0.3\nsep=4\n"
      "channels=f0>f1:0.8, f2>f3:-0.5\nseed=42\n"));
  CHECK(cfg.n_features == 12);
  CHECK(cfg.n_rows == 500);
  CHECK(cfg.k == 3);
  CHECK(cfg.support == "random");
  CHECK(cfg.random_p == doctest::Approx(0.2));
  CHECK(cfg.edge_weight == doctest::Approx(0.3));
  REQUIRE(cfg.channels.size() == 2);
  CHECK(cfg.channels[1].coeff == doctest::Approx(-0.5));
  CHECK(cfg.seed == 42);
  CHECK_THROWS_AS((void)SynthConfig::from_keyval(KeyVal::from_string("S=1\n")), Error);
  CHECK_THROWS_AS(
      (void)SynthConfig::from_keyval(KeyVal::from_string("S=4\nchannels=f0:f1\n")), Error);
}
