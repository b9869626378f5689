#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "glseg/core/error.hpp"
#include "glseg/dataset/synthetic.hpp"
#include "glseg/pipeline/pipeline.hpp"
#include "glseg/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace glseg;

namespace {

struct GlobalArgs {
  std::string config;
  std::optional<std::int64_t> seed;
  std::string out;
};

PipelineConfig make_config(const GlobalArgs& g) {
  if (g.config.empty()) {
    fail(ErrorCode::config, "--config <file> is required for this subcommand");
  }
  KeyVal kv = KeyVal::from_file(g.config);
  if (g.seed) kv.set("seed", std::to_string(*g.seed));
  if (!g.out.empty()) kv.set("out", g.out);
  return PipelineConfig::from_keyval(kv);
}

int run_stage(const GlobalArgs& g, Stage stop_after) {
  const PipelineConfig cfg = make_config(g);
  run_pipeline(cfg, stop_after);
  std::cout << "ok: " << stage_name(stop_after) << " outputs in " << cfg.out_dir
            << " (seed " << cfg.seed << ", backend "
            << simd::backend_name(simd::active_backend()) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavioral segmentation toolkit for energy social-game telemetry"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalArgs g;
  app.add_option("--config", g.config, "key=value pipeline config file");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--out", g.out, "override the output directory");

  // Stage subcommands share the config; each runs the pipeline up to its
  // stage, reusing cached predecessors.
  auto* sub_ingest = app.add_subcommand("ingest", "load, validate and normalize the input");
  auto* sub_cluster = app.add_subcommand("cluster", "unsupervised clustering + k selection");
  auto* sub_classify = app.add_subcommand("classify", "rank-segment player classes");
  auto* sub_glasso =
      app.add_subcommand("glasso", "per-group correlation matrices and sparse graphs");
  auto* sub_granger = app.add_subcommand("granger", "pairwise Granger causality table");
  auto* sub_similarity =
      app.add_subcommand("similarity", "class/cluster similarity and label transfer");
  auto* sub_pipeline = app.add_subcommand("pipeline", "run every stage and write report.json");

  auto* sub_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_config;
  sub_synth->add_option("--synth-config", synth_config,
                        "synthetic config (falls back to --config)");

  auto* sub_plot = app.add_subcommand("plot-data", "export plot-ready CSVs from a run");
  std::string plot_kind, plot_group, plot_metric, plot_run, plot_out;
  sub_plot->add_option("--kind", plot_kind,
                       "elbow|silhouette|corr_heatmap|similarity_heatmap")
      ->required();
  sub_plot->add_option("--run", plot_run, "pipeline output directory")->required();
  sub_plot->add_option("--group", plot_group, "group for corr_heatmap");
  sub_plot->add_option("--metric", plot_metric, "metric for similarity_heatmap");
  sub_plot->add_option("--file", plot_out, "destination CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_ingest->parsed()) return run_stage(g, Stage::ingest);
    if (sub_cluster->parsed()) return run_stage(g, Stage::cluster);
    if (sub_classify->parsed()) return run_stage(g, Stage::classify);
    if (sub_glasso->parsed()) return run_stage(g, Stage::glasso);
    if (sub_granger->parsed()) return run_stage(g, Stage::granger);
    if (sub_similarity->parsed()) return run_stage(g, Stage::similarity);
    if (sub_pipeline->parsed()) return run_stage(g, Stage::report);

    if (sub_synth->parsed()) {
      const std::string path = synth_config.empty() ? g.config : synth_config;
      if (path.empty()) {
        fail(ErrorCode::config, "synth needs --synth-config (or --config) with S,N,k,...");
      }
      const SynthConfig scfg = SynthConfig::from_file(path);
      const std::uint64_t seed = g.seed ? static_cast<std::uint64_t>(*g.seed) : scfg.seed;
      const std::string out_dir = g.out.empty() ? "out" : g.out;
      fs::create_directories(out_dir);
      const SynthResult result = generate_synthetic(scfg, seed);
      write_csv(result.dataset, (fs::path(out_dir) / "dataset.csv").string());
      write_ground_truth_json(result.truth,
                              (fs::path(out_dir) / "truth.json").string());
      std::cout << "ok: wrote " << result.dataset.rows() << " rows, "
                << result.dataset.n_features() << " features to " << out_dir
                << "/dataset.csv (seed " << seed << ")\n";
      return 0;
    }

    if (sub_plot->parsed()) {
      emit_plot_data(plot_run, plot_kind, plot_group, plot_metric, plot_out);
      std::cout << "ok: wrote " << plot_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "[" << error_code_name(e.code()) << "] " << e.what() << "\n";
    return error_exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "[E_INTERNAL] " << e.what() << "\n";
    return error_exit_code(ErrorCode::internal);
  }
  return 0;
}
