#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glseg/causality/granger.hpp"
#include "glseg/clustering/kmeans.hpp"
#include "glseg/core/keyval.hpp"
#include "glseg/glasso/glasso.hpp"
#include "glseg/similarity/similarity.hpp"

namespace glseg {

inline constexpr const char* kVersion = "0.1.0";

enum class Stage { ingest, cluster, classify, glasso, granger, similarity, report };
const char* stage_name(Stage s);

struct PipelineConfig {
  // Exactly one of input / synth must be set.
  std::string input;
  std::string schema;            // required for format=telemetry
  std::string calendar;          // optional; adds the nine flag features
  std::string synth;             // synthetic-config path
  std::string format = "telemetry";  // telemetry | generic

  std::vector<std::string> features;         // empty: every dataset feature
  std::vector<std::string> cluster_exclude;  // default: points, rank
  std::vector<std::size_t> k_range;          // default: 1..6
  std::uint64_t seed = 7;
  std::size_t folds = 5;
  EdgeRule edge_rule = EdgeRule::Or;
  SegmentMode segment_mode = SegmentMode::rank_width;
  GrangerOptions granger;
  SeriesOptions series;
  std::vector<std::pair<std::string, std::string>> granger_pairs;  // empty: defaults
  SimilarityMetric similarity_binding = SimilarityMetric::rv;
  CorrelationMatrix::Kind similarity_source = CorrelationMatrix::Kind::pearson;
  KMeansOptions kmeans;
  std::string out_dir = "out";

  KeyVal effective() const;      // every field, defaults applied
  std::string config_hash() const;

  static PipelineConfig from_file(const std::string& path);
  static PipelineConfig from_keyval(const KeyVal& kv);
};

struct SegmentReport {
  nlohmann::ordered_json json;
  std::string out_dir;
};

// Runs the staged pipeline up to `stop_after`, reusing cached stage outputs
// when the config and inputs are unchanged. A stage failure writes
// <out>/partial_manifest.json and rethrows with the stage name.
SegmentReport run_pipeline(const PipelineConfig& cfg, Stage stop_after = Stage::report);

// Copies the plot-ready CSV behind `kind` out of a finished run directory.
// kind: elbow | silhouette | corr_heatmap (needs group) | similarity_heatmap.
void emit_plot_data(const std::string& run_dir, const std::string& kind,
                    const std::string& group, const std::string& metric,
                    const std::string& out_path);

// Artifact I/O shared by stages, the CLI, and the tests.
void write_matrix_csv(const CorrelationMatrix& m, const std::string& path);
CorrelationMatrix read_matrix_csv(const std::string& path, CorrelationMatrix::Kind kind);

}  // namespace glseg
