#include "glseg/pipeline/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "glseg/core/csv.hpp"
#include "glseg/core/error.hpp"
#include "glseg/core/hash.hpp"
#include "glseg/core/rng.hpp"
#include "glseg/dataset/synthetic.hpp"

namespace glseg {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::cluster: return "cluster";
    case Stage::classify: return "classify";
    case Stage::glasso: return "glasso";
    case Stage::granger: return "granger";
    case Stage::similarity: return "similarity";
    case Stage::report: return "report";
  }
  return "?";
}

namespace {

const std::vector<std::pair<std::string, std::string>> kTelemetryPairs = {
    {"ceiling_fan", "ceiling_light"}, {"humidity", "ceiling_fan"},
    {"desk_light", "ceiling_fan"},    {"ceiling_light", "desk_light"},
    {"morning", "desk_light"},        {"afternoon", "ceiling_fan"},
    {"evening", "ceiling_light"}};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot read file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write file: " + path);
  out << content;
}

void write_json_file(const std::string& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

ordered_json read_json_file(const std::string& path) {
  try {
    return ordered_json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::io, "cannot parse JSON file " + path + ": " + e.what());
  }
}

std::vector<std::size_t> parse_k_range(const std::string& text) {
  std::vector<std::size_t> ks;
  const std::size_t dots = text.find("..");
  if (dots != std::string::npos) {
    const long lo = std::stol(text.substr(0, dots));
    const long hi = std::stol(text.substr(dots + 2));
    if (lo < 1 || hi < lo) fail(ErrorCode::config, "bad k_range: " + text);
    for (long k = lo; k <= hi; ++k) ks.push_back(static_cast<std::size_t>(k));
    return ks;
  }
  for (const std::string& item : split_list(text)) {
    const long k = std::stol(item);
    if (k < 1) fail(ErrorCode::config, "bad k in k_range: " + item);
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) fail(ErrorCode::config, "empty k_range");
  std::sort(ks.begin(), ks.end());
  return ks;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const std::string& item : split_list(text)) {
    const std::size_t gt = item.find('>');
    if (gt == std::string::npos) {
      fail(ErrorCode::config, "granger pair must look like 'cause>effect': " + item);
    }
    pairs.emplace_back(trim(item.substr(0, gt)), trim(item.substr(gt + 1)));
  }
  return pairs;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

PipelineConfig PipelineConfig::from_keyval(const KeyVal& kv) {
  PipelineConfig cfg;
  cfg.input = kv.get_or("input", "");
  cfg.schema = kv.get_or("schema", "");
  cfg.calendar = kv.get_or("calendar", "");
  cfg.synth = kv.get_or("synth", "");
  cfg.format = kv.get_or("format", "telemetry");
  if (cfg.format != "telemetry" && cfg.format != "generic") {
    fail(ErrorCode::config, "format must be telemetry or generic");
  }
  if (cfg.input.empty() == cfg.synth.empty()) {
    fail(ErrorCode::config, "config needs exactly one of 'input' or 'synth'");
  }
  if (!cfg.input.empty() && cfg.format == "telemetry" && cfg.schema.empty()) {
    fail(ErrorCode::config, "telemetry input needs a 'schema' file");
  }

  if (kv.has("features")) cfg.features = split_list(*kv.get("features"));
  cfg.cluster_exclude = split_list(kv.get_or("cluster_exclude", "points,rank"));
  cfg.k_range = parse_k_range(kv.get_or("k_range", "1..6"));
  cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 7));
  cfg.folds = static_cast<std::size_t>(kv.get_int("folds", 5));

  const std::string rule = kv.get_or("edge_rule", "or");
  if (rule == "or") cfg.edge_rule = EdgeRule::Or;
  else if (rule == "and") cfg.edge_rule = EdgeRule::And;
  else fail(ErrorCode::config, "edge_rule must be 'or' or 'and'");

  const std::string seg = kv.get_or("segment_mode", "rank_width");
  if (seg == "rank_width") cfg.segment_mode = SegmentMode::rank_width;
  else if (seg == "tertile") cfg.segment_mode = SegmentMode::player_tertile;
  else fail(ErrorCode::config, "segment_mode must be 'rank_width' or 'tertile'");

  const std::string lag = kv.get_or("granger_lag", "1");
  if (lag == "bic") {
    cfg.granger.bic_lag = true;
    cfg.granger.lag = 1;
  } else {
    cfg.granger.lag = static_cast<unsigned>(std::stoul(lag));
    if (cfg.granger.lag < 1) fail(ErrorCode::config, "granger_lag must be >= 1");
  }
  cfg.granger.max_lag = static_cast<unsigned>(kv.get_int("granger_max_lag", 5));
  cfg.granger.alpha = kv.get_double("granger_alpha", 0.05);
  cfg.series.window_minutes =
      static_cast<unsigned>(kv.get_int("granger_window", 15));
  const std::string mode = kv.get_or("granger_mode", "representative");
  if (mode == "representative") cfg.series.mode = SeriesMode::representative;
  else if (mode == "pooled") cfg.series.mode = SeriesMode::pooled;
  else fail(ErrorCode::config, "granger_mode must be 'representative' or 'pooled'");
  if (kv.has("granger_pairs")) cfg.granger_pairs = parse_pairs(*kv.get("granger_pairs"));

  const std::string metric = kv.get_or("similarity_metric", "rv");
  if (metric == "rv") cfg.similarity_binding = SimilarityMetric::rv;
  else if (metric == "pearson") cfg.similarity_binding = SimilarityMetric::pearson;
  else fail(ErrorCode::config, "similarity_metric must be 'rv' or 'pearson'");

  const std::string source = kv.get_or("similarity_source", "pearson");
  if (source == "pearson") cfg.similarity_source = CorrelationMatrix::Kind::pearson;
  else if (source == "partial") cfg.similarity_source = CorrelationMatrix::Kind::partial;
  else fail(ErrorCode::config, "similarity_source must be 'pearson' or 'partial'");

  cfg.kmeans.batch = static_cast<std::size_t>(kv.get_int("batch", 1024));
  cfg.kmeans.max_iter = static_cast<std::size_t>(kv.get_int("kmeans_iters", 100));
  cfg.kmeans.silhouette_subsample =
      static_cast<std::size_t>(kv.get_int("silhouette_subsample", 20000));
  cfg.out_dir = kv.get_or("out", "out");
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  return from_keyval(KeyVal::from_file(path));
}

KeyVal PipelineConfig::effective() const {
  KeyVal kv;
  kv.set("input", input);
  kv.set("schema", schema);
  kv.set("calendar", calendar);
  kv.set("synth", synth);
  kv.set("format", format);
  kv.set("features", join(features, ","));
  kv.set("cluster_exclude", join(cluster_exclude, ","));
  std::string ks;
  for (std::size_t k : k_range) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  kv.set("k_range", ks);
  kv.set("seed", std::to_string(seed));
  kv.set("folds", std::to_string(folds));
  kv.set("edge_rule", edge_rule == EdgeRule::Or ? "or" : "and");
  kv.set("segment_mode", segment_mode == SegmentMode::rank_width ? "rank_width" : "tertile");
  kv.set("granger_lag", granger.bic_lag ? "bic" : std::to_string(granger.lag));
  kv.set("granger_max_lag", std::to_string(granger.max_lag));
  kv.set("granger_alpha", format_double(granger.alpha));
  kv.set("granger_window", std::to_string(series.window_minutes));
  kv.set("granger_mode",
         series.mode == SeriesMode::representative ? "representative" : "pooled");
  std::string ps;
  for (const auto& [a, b] : granger_pairs) ps += (ps.empty() ? "" : ",") + a + ">" + b;
  kv.set("granger_pairs", ps);
  kv.set("similarity_metric", similarity_metric_name(similarity_binding));
  kv.set("similarity_source",
         similarity_source == CorrelationMatrix::Kind::pearson ? "pearson" : "partial");
  kv.set("batch", std::to_string(kmeans.batch));
  kv.set("kmeans_iters", std::to_string(kmeans.max_iter));
  kv.set("silhouette_subsample", std::to_string(kmeans.silhouette_subsample));
  // out_dir is deliberately not part of the effective config: it says where
  // results land, not what they are, so relocated runs share provenance.
  return kv;
}

std::string PipelineConfig::config_hash() const {
  return hash_hex(fnv1a64(effective().canonical()));
}

void write_matrix_csv(const CorrelationMatrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write matrix CSV: " + path);
  std::vector<std::string> row;
  row.push_back("");
  for (const auto& l : m.labels) row.push_back(l);
  write_csv_row(out, row);
  for (std::size_t i = 0; i < m.values.rows; ++i) {
    row.clear();
    row.push_back(m.labels[i]);
    for (std::size_t j = 0; j < m.values.cols; ++j) {
      row.push_back(format_double(m.values.at(i, j)));
    }
    write_csv_row(out, row);
  }
}

CorrelationMatrix read_matrix_csv(const std::string& path, CorrelationMatrix::Kind kind) {
  const CsvTable table = read_csv(path);
  CorrelationMatrix m;
  m.kind = kind;
  const std::size_t S = table.header.size() - 1;
  if (table.rows.size() != S) {
    fail(ErrorCode::io, "matrix CSV is not square: " + path);
  }
  for (std::size_t j = 1; j <= S; ++j) m.labels.push_back(table.header[j]);
  m.values = Mat(S, S);
  for (std::size_t i = 0; i < S; ++i) {
    if (table.rows[i].size() != S + 1 || table.rows[i][0] != m.labels[i]) {
      fail(ErrorCode::io, "matrix CSV row labels disagree with the header: " + path);
    }
    for (std::size_t j = 0; j < S; ++j) {
      m.values.at(i, j) = std::stod(table.rows[i][j + 1]);
    }
  }
  return m;
}

namespace {

// ---------------------------------------------------------------------------
// Stage plumbing: every stage reads its predecessors' files and writes its
// own, so cached and fresh runs are indistinguishable downstream.
// ---------------------------------------------------------------------------

struct StageIo {
  const PipelineConfig& cfg;
  fs::path out;
  std::string config_hash;
  std::vector<std::string> completed;

  std::string file(const std::string& name) const { return (out / name).string(); }
  std::string manifest_path(Stage s) const {
    return (out / "stages" / (std::string(stage_name(s)) + ".json")).string();
  }

  bool cache_valid(Stage s, const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) const {
    const std::string mpath = manifest_path(s);
    if (!fs::exists(mpath)) return false;
    ordered_json m;
    try {
      m = read_json_file(mpath);
    } catch (const Error&) {
      return false;
    }
    if (m.value("version", "") != kVersion) return false;
    if (m.value("config_hash", "") != config_hash) return false;
    for (const auto& list : {std::pair{"inputs", inputs}, std::pair{"outputs", outputs}}) {
      if (!m.contains(list.first)) return false;
      for (const std::string& f : list.second) {
        if (!fs::exists(f)) return false;
        const auto& rec = m[list.first];
        if (!rec.contains(f)) return false;
        if (rec[f] != hash_hex(hash_file(f))) return false;
      }
    }
    return true;
  }

  void save_manifest(Stage s, const std::vector<std::string>& inputs,
                     const std::vector<std::string>& outputs) const {
    ordered_json m;
    m["stage"] = stage_name(s);
    m["version"] = kVersion;
    m["config_hash"] = config_hash;
    m["seed"] = cfg.seed;
    ordered_json in_j, out_j;
    for (const std::string& f : inputs) in_j[f] = hash_hex(hash_file(f));
    for (const std::string& f : outputs) out_j[f] = hash_hex(hash_file(f));
    m["inputs"] = std::move(in_j);
    m["outputs"] = std::move(out_j);
    write_json_file(manifest_path(s), m);
  }
};

Dataset load_pipeline_dataset(const StageIo& io) {
  return load_normalized_csv(io.file("dataset.csv")).dataset;
}

std::vector<std::string> analysis_features(const PipelineConfig& cfg, const Dataset& ds) {
  std::vector<std::string> feats = cfg.features.empty() ? ds.feature_names : cfg.features;
  for (const std::string& f : feats) {
    if (ds.feature_index(f) < 0) fail(ErrorCode::schema, "unknown feature in config: " + f);
  }
  return feats;
}

std::vector<std::string> cluster_features(const PipelineConfig& cfg, const Dataset& ds) {
  std::vector<std::string> feats;
  for (const std::string& f : analysis_features(cfg, ds)) {
    if (std::find(cfg.cluster_exclude.begin(), cfg.cluster_exclude.end(), f) ==
        cfg.cluster_exclude.end()) {
      feats.push_back(f);
    }
  }
  if (feats.empty()) fail(ErrorCode::config, "cluster_exclude removes every feature");
  return feats;
}

void stage_ingest(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  std::vector<std::string> inputs;
  const bool synth = !cfg.synth.empty();
  if (synth) {
    inputs = {cfg.synth};
  } else {
    inputs = {cfg.input};
    if (!cfg.schema.empty()) inputs.push_back(cfg.schema);
  }
  if (!cfg.calendar.empty()) inputs.push_back(cfg.calendar);

  std::vector<std::string> outputs = {io.file("dataset.csv"), io.file("ingest.json")};
  if (synth) outputs.push_back(io.file("truth.json"));
  if (io.cache_valid(Stage::ingest, inputs, outputs)) return;

  LoadResult lr;
  ordered_json extra;
  if (synth) {
    const SynthConfig scfg = SynthConfig::from_file(cfg.synth);
    SynthResult sr = generate_synthetic(scfg, cfg.seed);
    lr.dataset = std::move(sr.dataset);
    lr.report.total_rows = lr.report.kept_rows = lr.dataset.rows();
    write_ground_truth_json(sr.truth, io.file("truth.json"));
    extra["source"] = "synthetic";
    extra["synth_config"] = cfg.synth;
  } else if (cfg.format == "telemetry") {
    lr = load_csv(cfg.input, ColumnSchema::from_file(cfg.schema));
    extra["source"] = cfg.input;
  } else {
    lr = load_normalized_csv(cfg.input);
    extra["source"] = cfg.input;
  }
  if (!cfg.calendar.empty()) {
    lr.dataset = derive_flags(lr.dataset, AcademicCalendar::from_file(cfg.calendar));
  }
  write_csv(lr.dataset, io.file("dataset.csv"));

  ordered_json j = std::move(extra);
  j["total_rows"] = lr.report.total_rows;
  j["kept_rows"] = lr.report.kept_rows;
  j["filled_values"] = lr.report.filled_values;
  j["missing_rows"] = lr.report.missing_rows;
  j["errors"] = ordered_json::array();
  for (const RowError& e : lr.report.errors) {
    j["errors"].push_back({{"line", e.line}, {"column", e.column}, {"message", e.message}});
  }
  j["notes"] = lr.report.notes;
  write_json_file(io.file("ingest.json"), j);
  io.save_manifest(Stage::ingest, inputs, outputs);
}

void stage_cluster(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  const std::vector<std::string> inputs = {io.file("dataset.csv")};
  const std::vector<std::string> outputs = {
      io.file("labels.csv"), io.file("elbow.csv"), io.file("silhouette.csv"),
      io.file("centers.csv"), io.file("cluster.json")};
  if (io.cache_valid(Stage::cluster, inputs, outputs)) return;

  const Dataset ds = load_pipeline_dataset(io);
  const std::vector<std::string> feats = cluster_features(cfg, ds);
  const FeatureMatrix fm = standardize(ds, feats);

  ordered_json j;
  j["cluster_features"] = fm.labels;
  j["dropped_constant"] = fm.dropped_constant;
  j["seed"] = cfg.seed;

  ClusterAssignment chosen;
  ordered_json per_k = ordered_json::array();
  const bool forced = cfg.k_range.size() == 1;
  if (forced) {
    const std::size_t k = cfg.k_range[0];
    chosen = minibatch_kmeans(fm, k, cfg.kmeans, Rng::derive(cfg.seed, k));
    per_k.push_back({{"k", k},
                     {"distortion", chosen.distortion},
                     {"silhouette", chosen.silhouette ? ordered_json(*chosen.silhouette)
                                                      : ordered_json(nullptr)}});
    j["k"] = k;
    j["forced"] = true;
    j["selected_by"] = "forced";
  } else {
    SelectKResult sel = select_k(fm, cfg.k_range, cfg.seed, cfg.kmeans);
    for (std::size_t i = 0; i < sel.elbow.ks.size(); ++i) {
      per_k.push_back({{"k", sel.elbow.ks[i]},
                       {"distortion", sel.elbow.distortions[i]},
                       {"silhouette", sel.silhouettes[i] ? ordered_json(*sel.silhouettes[i])
                                                         : ordered_json(nullptr)}});
    }
    j["k"] = sel.k;
    j["forced"] = false;
    j["selected_by"] = "silhouette";
    j["elbow_suggestion"] = sel.elbow.suggested_k ? ordered_json(*sel.elbow.suggested_k)
                                                  : ordered_json(nullptr);
    j["elbow_curvature_ratio"] = sel.elbow.curvature_ratio;
    j["elbow_low_confidence"] = sel.elbow.low_confidence;
    j["criteria_disagree"] = sel.criteria_disagree;
    for (std::size_t i = 0; i < sel.elbow.ks.size(); ++i) {
      if (sel.elbow.ks[i] == sel.k) chosen = std::move(sel.assignments[i]);
    }
  }
  j["per_k"] = std::move(per_k);
  j["distortion"] = chosen.distortion;
  j["silhouette"] =
      chosen.silhouette ? ordered_json(*chosen.silhouette) : ordered_json(nullptr);
  j["empty_clusters"] = chosen.empty_clusters;
  j["iterations"] = chosen.iterations;

  {
    std::ofstream out(io.file("labels.csv"), std::ios::binary);
    write_csv_row(out, {"row_id", "cluster"});
    for (std::size_t i = 0; i < chosen.labels.size(); ++i) {
      write_csv_row(out, {std::to_string(fm.row_ids[i]), std::to_string(chosen.labels[i])});
    }
  }
  {
    std::ofstream out(io.file("elbow.csv"), std::ios::binary);
    write_csv_row(out, {"k", "distortion"});
    for (const auto& row : j["per_k"]) {
      write_csv_row(out, {std::to_string(row["k"].get<std::size_t>()),
                          format_double(row["distortion"].get<double>())});
    }
  }
  {
    std::ofstream out(io.file("silhouette.csv"), std::ios::binary);
    write_csv_row(out, {"k", "silhouette"});
    for (const auto& row : j["per_k"]) {
      write_csv_row(out, {std::to_string(row["k"].get<std::size_t>()),
                          row["silhouette"].is_null()
                              ? ""
                              : format_double(row["silhouette"].get<double>())});
    }
  }
  {
    std::ofstream out(io.file("centers.csv"), std::ios::binary);
    write_csv_row(out, fm.labels);
    ordered_json centers = ordered_json::array();
    for (std::size_t c = 0; c < chosen.k; ++c) {
      std::vector<std::string> row;
      ordered_json jrow = ordered_json::array();
      for (std::size_t d = 0; d < chosen.centers.cols; ++d) {
        row.push_back(format_double(chosen.centers.at(c, d)));
        jrow.push_back(chosen.centers.at(c, d));
      }
      write_csv_row(out, row);
      centers.push_back(std::move(jrow));
    }
    j["centers"] = std::move(centers);
  }
  write_json_file(io.file("cluster.json"), j);
  io.save_manifest(Stage::cluster, inputs, outputs);
}

void stage_classify(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  const std::vector<std::string> inputs = {io.file("dataset.csv")};
  const std::vector<std::string> outputs = {io.file("classes.csv"),
                                            io.file("classify.json")};
  if (io.cache_valid(Stage::classify, inputs, outputs)) return;

  const Dataset ds = load_pipeline_dataset(io);
  const RankSegments segs = build_segments(ds, cfg.segment_mode);
  const ClassAssignment ca = assign_players(ds, segs);

  {
    std::ofstream out(io.file("classes.csv"), std::ios::binary);
    write_csv_row(out, {"player_id", "class", "count_high", "count_medium", "count_low",
                        "n_i", "overall_median_rank"});
    for (const PlayerClass& pc : ca.players) {
      write_csv_row(out, {pc.player, energy_class_name(pc.cls),
                          std::to_string(pc.counts[0]), std::to_string(pc.counts[1]),
                          std::to_string(pc.counts[2]), std::to_string(pc.n_records),
                          std::to_string(pc.median_rank)});
    }
  }
  ordered_json j;
  j["mode"] = cfg.segment_mode == SegmentMode::rank_width ? "rank_width" : "tertile";
  j["segments"] = {{"lo", segs.lo},
                   {"hi", segs.hi},
                   {"high", {segs.lo, segs.cut1 - 1}},
                   {"medium", {segs.cut1, segs.cut2 - 1}},
                   {"low", {segs.cut2, segs.hi}}};
  ordered_json reps;
  ordered_json sizes;
  for (EnergyClass c : {EnergyClass::High, EnergyClass::Medium, EnergyClass::Low}) {
    const auto members = ca.members(c);
    sizes[energy_class_name(c)] = members.size();
    reps[energy_class_name(c)] =
        members.empty() ? ordered_json(nullptr) : ordered_json(representative_player(ca, c));
  }
  j["class_sizes"] = std::move(sizes);
  j["representatives"] = std::move(reps);
  write_json_file(io.file("classify.json"), j);
  io.save_manifest(Stage::classify, inputs, outputs);
}

ClassAssignment read_classes_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  ClassAssignment ca;
  for (const auto& row : table.rows) {
    PlayerClass pc;
    pc.player = row[0];
    if (row[1] == "high") pc.cls = EnergyClass::High;
    else if (row[1] == "medium") pc.cls = EnergyClass::Medium;
    else if (row[1] == "low") pc.cls = EnergyClass::Low;
    else fail(ErrorCode::io, "bad class in " + path + ": " + row[1]);
    pc.counts = {std::stoull(row[2]), std::stoull(row[3]), std::stoull(row[4])};
    pc.n_records = std::stoull(row[5]);
    pc.median_rank = std::stoi(row[6]);
    ca.players.push_back(std::move(pc));
  }
  return ca;
}

std::vector<std::string> group_names(std::size_t k) {
  std::vector<std::string> names = {"sup_high", "sup_medium", "sup_low"};
  for (std::size_t c = 1; c <= k; ++c) names.push_back("unsup_" + std::to_string(c));
  return names;
}

// Group correlation over the full requested feature list: features constant
// within the group keep a zero row/column and are reported.
CorrelationMatrix embed_matrix(const CorrelationMatrix& m,
                               const std::vector<std::string>& full) {
  CorrelationMatrix out;
  out.kind = m.kind;
  out.labels = full;
  out.values = Mat::identity(full.size());
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < m.labels.size(); ++i) pos[m.labels[i]] = i;
  for (std::size_t i = 0; i < full.size(); ++i) {
    auto pi = pos.find(full[i]);
    if (pi == pos.end()) continue;
    for (std::size_t j = 0; j < full.size(); ++j) {
      auto pj = pos.find(full[j]);
      if (pj == pos.end() || i == j) continue;
      out.values.at(i, j) = m.values.at(pi->second, pj->second);
    }
  }
  return out;
}

void stage_glasso(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  const std::vector<std::string> inputs = {io.file("dataset.csv"), io.file("labels.csv"),
                                           io.file("cluster.json"), io.file("classes.csv"),
                                           io.file("classify.json")};
  const Dataset ds = load_pipeline_dataset(io);
  const ordered_json cluster_json = read_json_file(io.file("cluster.json"));
  const std::size_t k = cluster_json["k"].get<std::size_t>();

  std::vector<std::string> outputs = {io.file("glasso.json")};
  const auto groups = group_names(k);
  for (const std::string& g : groups) {
    outputs.push_back(io.file("corr_" + g + ".csv"));
    outputs.push_back(io.file("pcorr_" + g + ".csv"));
    outputs.push_back(io.file("edges_" + g + ".csv"));
  }
  if (io.cache_valid(Stage::glasso, inputs, outputs)) return;

  const ordered_json classify_json = read_json_file(io.file("classify.json"));
  const std::vector<std::string> sup_feats = analysis_features(cfg, ds);
  const std::vector<std::string> unsup_feats = cluster_features(cfg, ds);

  // Row sets per group.
  std::map<std::string, std::vector<std::size_t>> group_rows;
  for (int ci = 0; ci < 3; ++ci) {
    const EnergyClass cls = static_cast<EnergyClass>(ci);
    const auto& rep = classify_json["representatives"][energy_class_name(cls)];
    if (rep.is_null()) continue;
    const std::string player = rep.get<std::string>();
    auto& rows = group_rows[groups[ci]];
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (!ds.row_missing[i] && ds.player_ids[i] == player) rows.push_back(i);
    }
  }
  {
    const CsvTable labels = read_csv(io.file("labels.csv"));
    for (const auto& row : labels.rows) {
      const std::size_t rid = std::stoull(row[0]);
      const std::size_t cluster = std::stoull(row[1]);
      group_rows["unsup_" + std::to_string(cluster + 1)].push_back(rid);
    }
  }

  ordered_json j;
  std::size_t gi = 0;
  for (const std::string& g : groups) {
    const bool sup = g.rfind("sup_", 0) == 0;
    const std::vector<std::string>& feats = sup ? sup_feats : unsup_feats;
    const auto it = group_rows.find(g);

    ordered_json gj;
    CorrelationMatrix corr, pcorr;
    corr.kind = CorrelationMatrix::Kind::pearson;
    pcorr.kind = CorrelationMatrix::Kind::partial;
    corr.labels = pcorr.labels = feats;
    corr.values = pcorr.values = Mat::identity(feats.size());

    if (it == group_rows.end() || it->second.size() < 2) {
      gj["rows"] = it == group_rows.end() ? 0 : it->second.size();
      gj["defects"] = {std::string("group has too few rows for correlation analysis")};
    } else {
      const auto& rows = it->second;
      gj["rows"] = rows.size();
      std::vector<std::vector<double>> cols(feats.size());
      for (std::size_t f = 0; f < feats.size(); ++f) {
        const int col = ds.feature_index(feats[f]);
        cols[f].reserve(rows.size());
        for (std::size_t r : rows) cols[f].push_back(ds.at(r, col));
      }
      const FeatureMatrix gfm = standardize_columns(feats, cols);
      gj["dropped_constant"] = gfm.dropped_constant;

      corr = embed_matrix(pearson_matrix(gfm), feats);
      CvOptions cv;
      cv.folds = cfg.folds;
      cv.seed = Rng::derive(cfg.seed, 7000 + gi);
      const NeighborhoodGraph graph = fit_graph(gfm, cfg.edge_rule, cv);
      pcorr = embed_matrix(partial_correlation_matrix(graph), feats);

      {
        std::ofstream out(io.file("edges_" + g + ".csv"), std::ios::binary);
        write_csv_row(out, {"vertex_a", "vertex_b", "partial_correlation"});
        for (const auto& [a, b] : graph.edges) {
          write_csv_row(out, {graph.labels[a], graph.labels[b],
                              format_double(graph.partial_correlations.at(a, b))});
        }
      }
      gj["edges"] = graph.edges.size();
      gj["defects"] = graph.defects;
      ordered_json verts = ordered_json::array();
      for (const auto& fit : graph.fits) {
        if (!fit) continue;
        ordered_json vj;
        vj["vertex"] = graph.labels[fit->vertex];
        vj["lambda"] = fit->lambda;
        vj["cv_loss"] = fit->cv_loss;
        vj["noise_var"] = fit->noise_var;
        vj["converged"] = fit->converged;
        ordered_json support = ordered_json::array();
        for (std::size_t s : fit->support) support.push_back(graph.labels[s]);
        vj["support"] = std::move(support);
        verts.push_back(std::move(vj));
      }
      gj["vertices"] = std::move(verts);
    }

    write_matrix_csv(corr, io.file("corr_" + g + ".csv"));
    write_matrix_csv(pcorr, io.file("pcorr_" + g + ".csv"));
    if (!fs::exists(io.file("edges_" + g + ".csv"))) {
      std::ofstream out(io.file("edges_" + g + ".csv"), std::ios::binary);
      write_csv_row(out, {"vertex_a", "vertex_b", "partial_correlation"});
    }
    j[g] = std::move(gj);
    ++gi;
  }
  write_json_file(io.file("glasso.json"), j);
  io.save_manifest(Stage::glasso, inputs, outputs);
}

void stage_granger(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  const std::vector<std::string> inputs = {io.file("dataset.csv"), io.file("classes.csv")};
  const std::vector<std::string> outputs = {io.file("granger.csv"), io.file("granger.txt"),
                                            io.file("granger.json")};
  if (io.cache_valid(Stage::granger, inputs, outputs)) return;

  const Dataset ds = load_pipeline_dataset(io);
  const ClassAssignment classes = read_classes_csv(io.file("classes.csv"));

  std::vector<std::pair<std::string, std::string>> pairs = cfg.granger_pairs;
  if (pairs.empty()) {
    bool have_all = true;
    for (const auto& [a, b] : kTelemetryPairs) {
      if (ds.feature_index(a) < 0 || ds.feature_index(b) < 0) have_all = false;
    }
    if (!have_all) {
      fail(ErrorCode::config,
           "granger_pairs must be configured for datasets without the telemetry features");
    }
    pairs = kTelemetryPairs;
  }

  const CausalityTable table =
      causality_table(ds, classes, pairs, cfg.granger, cfg.series);

  {
    std::ofstream out(io.file("granger.csv"), std::ios::binary);
    write_csv_row(out, {"class", "cause", "effect", "lag", "f_statistic", "p_value",
                        "verdict"});
    for (const CausalityCell& cell : table.cells) {
      write_csv_row(out, {energy_class_name(cell.cls), cell.result.cause,
                          cell.result.effect, std::to_string(cell.result.lag),
                          format_double(cell.result.f_statistic),
                          format_double(cell.result.p_value),
                          cell.result.causal ? "causal" : "not_causal"});
    }
  }
  {
    // Human-readable table, one row per class; small p-values print as <1e-4.
    std::ostringstream txt;
    txt << "Granger causality (alpha=" << cfg.granger.alpha
        << ", mode=" << (cfg.series.mode == SeriesMode::representative ? "representative"
                                                                       : "pooled")
        << ", window=" << cfg.series.window_minutes << "m)\n\n";
    txt << "class";
    for (const auto& [a, b] : table.pairs) txt << "\t" << a << "=>" << b;
    txt << "\n";
    std::size_t idx = 0;
    for (EnergyClass cls : table.classes) {
      txt << energy_class_name(cls);
      for (std::size_t p = 0; p < table.pairs.size(); ++p, ++idx) {
        const GrangerResult& r = table.cells[idx].result;
        char buf[64];
        if (r.degenerate) {
          std::snprintf(buf, sizeof(buf), "degenerate");
        } else if (r.p_value < 1e-4) {
          std::snprintf(buf, sizeof(buf), "p<1e-4 F=%.3g%s", r.f_statistic,
                        r.causal ? "*" : "");
        } else {
          std::snprintf(buf, sizeof(buf), "p=%.3g F=%.3g%s", r.p_value, r.f_statistic,
                        r.causal ? "*" : "");
        }
        txt << "\t" << buf;
      }
      txt << "\n";
    }
    txt << "\n* causal at the configured significance level\n";
    write_text(io.file("granger.txt"), txt.str());
  }
  {
    ordered_json j;
    j["alpha"] = cfg.granger.alpha;
    j["lag_mode"] = cfg.granger.bic_lag ? "bic" : std::to_string(cfg.granger.lag);
    j["window_minutes"] = cfg.series.window_minutes;
    j["mode"] =
        cfg.series.mode == SeriesMode::representative ? "representative" : "pooled";
    ordered_json cells = ordered_json::array();
    for (const CausalityCell& cell : table.cells) {
      cells.push_back({{"class", energy_class_name(cell.cls)},
                       {"player", cell.player},
                       {"cause", cell.result.cause},
                       {"effect", cell.result.effect},
                       {"lag", cell.result.lag},
                       {"f_statistic", cell.result.f_statistic},
                       {"p_value", cell.result.p_value},
                       {"n_effective", cell.result.n_effective},
                       {"causal", cell.result.causal},
                       {"degenerate", cell.result.degenerate}});
    }
    j["cells"] = std::move(cells);
    j["notes"] = table.notes;
    write_json_file(io.file("granger.json"), j);
  }
  io.save_manifest(Stage::granger, inputs, outputs);
}

void stage_similarity(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  const std::string kind_prefix =
      cfg.similarity_source == CorrelationMatrix::Kind::pearson ? "corr_" : "pcorr_";
  const std::vector<std::string> sup_names = {"sup_high", "sup_medium", "sup_low"};
  const ordered_json cluster_json = read_json_file(io.file("cluster.json"));
  const std::size_t k = cluster_json["k"].get<std::size_t>();
  if (k != 3) {
    fail(ErrorCode::degenerate, "label transfer needs exactly 3 clusters, got k=" +
                                    std::to_string(k));
  }
  std::vector<std::string> inputs;
  for (const std::string& g : sup_names) inputs.push_back(io.file(kind_prefix + g + ".csv"));
  for (int c = 1; c <= 3; ++c) {
    inputs.push_back(io.file(kind_prefix + "unsup_" + std::to_string(c) + ".csv"));
  }
  inputs.push_back(io.file("cluster.json"));
  const std::vector<std::string> outputs = {io.file("similarity_pearson.csv"),
                                            io.file("similarity_rv.csv"),
                                            io.file("mapping.json")};
  if (io.cache_valid(Stage::similarity, inputs, outputs)) return;

  std::array<CorrelationMatrix, 3> sup, unsup;
  for (int i = 0; i < 3; ++i) {
    sup[i] = read_matrix_csv(inputs[i], cfg.similarity_source);
    unsup[i] = read_matrix_csv(inputs[3 + i], cfg.similarity_source);
  }
  // The supervised matrices carry the full feature set; restrict them to the
  // cluster features before comparison (transfer_labels drops points/rank).
  for (int i = 0; i < 3; ++i) {
    std::vector<std::size_t> keep;
    std::map<std::string, std::size_t> pos;
    for (std::size_t a = 0; a < sup[i].labels.size(); ++a) pos[sup[i].labels[a]] = a;
    CorrelationMatrix trimmed;
    trimmed.kind = sup[i].kind;
    trimmed.labels = unsup[i].labels;
    trimmed.values = Mat::identity(unsup[i].labels.size());
    for (std::size_t a = 0; a < trimmed.labels.size(); ++a) {
      auto pa = pos.find(trimmed.labels[a]);
      if (pa == pos.end()) {
        fail(ErrorCode::validation, "supervised matrix lacks feature " + trimmed.labels[a]);
      }
      for (std::size_t b = 0; b < trimmed.labels.size(); ++b) {
        auto pb = pos.find(trimmed.labels[b]);
        if (pb == pos.end() || a == b) continue;
        trimmed.values.at(a, b) = sup[i].values.at(pa->second, pb->second);
      }
    }
    sup[i] = std::move(trimmed);
  }

  const TransferResult transfer = transfer_labels(sup, unsup, cfg.similarity_binding);

  auto write_similarity = [&](const SimilarityMatrix& sm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    std::vector<std::string> row = {""};
    for (const auto& l : sm.col_labels) row.push_back(l);
    write_csv_row(out, row);
    for (int r = 0; r < 3; ++r) {
      row = {sm.row_labels[r]};
      for (int c = 0; c < 3; ++c) row.push_back(format_double(sm.values[r][c]));
      write_csv_row(out, row);
    }
  };
  write_similarity(transfer.pearson, io.file("similarity_pearson.csv"));
  write_similarity(transfer.rv, io.file("similarity_rv.csv"));

  ordered_json j;
  j["binding_metric"] = similarity_metric_name(cfg.similarity_binding);
  j["source"] =
      cfg.similarity_source == CorrelationMatrix::Kind::pearson ? "pearson" : "partial";
  ordered_json mapping;
  for (int c = 0; c < 3; ++c) {
    mapping["cluster_" + std::to_string(c + 1)] = {
        {"class", energy_class_name(transfer.mapping.cluster_class[c])},
        {"score", transfer.mapping.scores[c]}};
  }
  j["mapping"] = std::move(mapping);
  j["conflict"] = transfer.mapping.conflict;
  j["metrics_disagree"] = transfer.metrics_disagree;
  ordered_json secondary;
  for (int c = 0; c < 3; ++c) {
    secondary["cluster_" + std::to_string(c + 1)] =
        energy_class_name(transfer.secondary.cluster_class[c]);
  }
  j["secondary_mapping"] = std::move(secondary);
  write_json_file(io.file("mapping.json"), j);
  io.save_manifest(Stage::similarity, inputs, outputs);
}

void stage_report(StageIo& io) {
  const PipelineConfig& cfg = io.cfg;
  std::vector<std::string> inputs = {io.file("ingest.json"),  io.file("cluster.json"),
                                     io.file("classify.json"), io.file("glasso.json"),
                                     io.file("granger.json"), io.file("mapping.json")};
  const std::vector<std::string> outputs = {io.file("report.json")};
  if (io.cache_valid(Stage::report, inputs, outputs)) return;

  ordered_json j;
  ordered_json prov;
  prov["version"] = kVersion;
  prov["config_hash"] = io.config_hash;
  prov["seed"] = cfg.seed;
  {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    prov["timestamp"] = buf;
  }
  j["provenance"] = std::move(prov);
  ordered_json cfg_j;
  const KeyVal effective = cfg.effective();
  for (const auto& [key, value] : effective.entries()) cfg_j[key] = value;
  j["config"] = std::move(cfg_j);
  j["ingest"] = read_json_file(io.file("ingest.json"));
  j["cluster"] = read_json_file(io.file("cluster.json"));
  j["classes"] = read_json_file(io.file("classify.json"));
  j["glasso"] = read_json_file(io.file("glasso.json"));
  j["granger"] = read_json_file(io.file("granger.json"));
  j["similarity"] = read_json_file(io.file("mapping.json"));
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(io.out)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name != "report.json" &&
        name != "partial_manifest.json") {
      files.push_back(name);
    }
  }
  std::sort(files.begin(), files.end());
  j["outputs"] = files;
  write_json_file(io.file("report.json"), j);
  io.save_manifest(Stage::report, inputs, outputs);
}

}  // namespace

SegmentReport run_pipeline(const PipelineConfig& cfg, Stage stop_after) {
  // Referenced paths must exist before any stage runs.
  for (const std::string& p : {cfg.input, cfg.schema, cfg.calendar, cfg.synth}) {
    if (!p.empty() && !fs::exists(p)) {
      fail(ErrorCode::io, "configured path does not exist: " + p);
    }
  }
  fs::create_directories(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "stages");

  StageIo io{cfg, fs::path(cfg.out_dir), cfg.config_hash(), {}};

  const std::vector<std::pair<Stage, void (*)(StageIo&)>> stages = {
      {Stage::ingest, stage_ingest},     {Stage::cluster, stage_cluster},
      {Stage::classify, stage_classify}, {Stage::glasso, stage_glasso},
      {Stage::granger, stage_granger},   {Stage::similarity, stage_similarity},
      {Stage::report, stage_report}};

  for (const auto& [stage, fn] : stages) {
    try {
      fn(io);
    } catch (const Error& e) {
      ordered_json partial;
      partial["failed_stage"] = stage_name(stage);
      partial["error_code"] = std::string(error_code_name(e.code()));
      partial["error"] = e.what();
      partial["completed_stages"] = io.completed;
      write_json_file(io.file("partial_manifest.json"), partial);
      fail(e.code(), std::string("stage ") + stage_name(stage) + ": " + e.what());
    }
    io.completed.push_back(stage_name(stage));
    if (stage == stop_after) break;
  }

  SegmentReport report;
  report.out_dir = cfg.out_dir;
  if (stop_after == Stage::report) {
    report.json = read_json_file(io.file("report.json"));
  } else {
    report.json["completed_stages"] = io.completed;
  }
  return report;
}

void emit_plot_data(const std::string& run_dir, const std::string& kind,
                    const std::string& group, const std::string& metric,
                    const std::string& out_path) {
  fs::path src;
  if (kind == "elbow") {
    src = fs::path(run_dir) / "elbow.csv";
  } else if (kind == "silhouette") {
    src = fs::path(run_dir) / "silhouette.csv";
  } else if (kind == "corr_heatmap") {
    if (group.empty()) {
      fail(ErrorCode::config, "corr_heatmap needs --group (e.g. sup_high, unsup_1)");
    }
    src = fs::path(run_dir) / ("corr_" + group + ".csv");
  } else if (kind == "similarity_heatmap") {
    const std::string m = metric.empty() ? "rv" : metric;
    if (m != "rv" && m != "pearson") {
      fail(ErrorCode::config, "similarity_heatmap metric must be rv or pearson");
    }
    src = fs::path(run_dir) / ("similarity_" + m + ".csv");
  } else {
    fail(ErrorCode::config,
         "unknown plot kind: " + kind +
             " (expected elbow|silhouette|corr_heatmap|similarity_heatmap)");
  }
  if (!fs::exists(src)) {
    fail(ErrorCode::degenerate,
         "requested stage output is missing from the run directory: " + src.string());
  }
  write_text(out_path, read_text(src.string()));
}

}  // namespace glseg
