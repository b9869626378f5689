// Exercises the installed CLI binary end to end; the binary path arrives as
// argv[1] from CTest.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define EXPECT(cond, msg)                                            \
  do {                                                               \
    if (!(cond)) {                                                   \
      std::cerr << "[FAIL] " << __LINE__ << ": " << msg << "\n";     \
      ++failures;                                                    \
    }                                                                \
  } while (0)

std::string g_binary;

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  const fs::path dir = fs::temp_directory_path() / "glseg_cli_tests";
  fs::create_directories(dir);
  const std::string out_file = (dir / "stdout.txt").string();
  const std::string err_file = (dir / "stderr.txt").string();
  const std::string cmd =
      g_binary + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  int code = -1;
  if (status != -1) code = WEXITSTATUS(status);
  return {code, slurp(out_file), slurp(err_file)};
}

std::string write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <path-to-glseg-binary>\n";
    return 2;
  }
  g_binary = argv[1];

  const fs::path dir = fs::temp_directory_path() / "glseg_cli_tests";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::string synth = write_file(
      dir / "synth.cfg",
      "S=6\nN=900\nk=3\nplayers=6\nsupport=chain\nrho=0.3\nsep=6\n"
      "channels=f0>f1:0.8\nseed=5\n");
  const std::string pipe = write_file(
      dir / "pipe.cfg", "synth=" + synth + "\nk_range=2..4\nseed=5\n"
                        "granger_window=1\ngranger_pairs=f0>f1\n"
                        "out=" + (dir / "run").string() + "\n");

  // synth subcommand writes the dataset and ground truth.
  {
    const RunResult r =
        run("synth --synth-config " + synth + " --out " + (dir / "synth_out").string());
    EXPECT(r.exit_code == 0, "synth exits 0; stderr: " << r.err);
    EXPECT(fs::exists(dir / "synth_out" / "dataset.csv"), "dataset.csv written");
    EXPECT(fs::exists(dir / "synth_out" / "truth.json"), "truth.json written");
  }

  // Full pipeline via the CLI.
  {
    const RunResult r = run("pipeline --config " + pipe);
    EXPECT(r.exit_code == 0, "pipeline exits 0; stderr: " << r.err);
    EXPECT(fs::exists(dir / "run" / "report.json"), "report.json written");
    EXPECT(r.out.find("ok:") == 0, "stdout starts with ok:");
  }

  // Stage subcommand reuses the cache.
  {
    const RunResult r = run("cluster --config " + pipe);
    EXPECT(r.exit_code == 0, "cluster exits 0; stderr: " << r.err);
  }

  // plot-data export.
  {
    const std::string out_csv = (dir / "elbow_export.csv").string();
    const RunResult r = run("plot-data --kind elbow --run " + (dir / "run").string() +
                            " --file " + out_csv);
    EXPECT(r.exit_code == 0, "plot-data exits 0; stderr: " << r.err);
    EXPECT(fs::exists(out_csv), "export written");
  }

  // Errors: machine-parseable code prefix on stderr, nonzero exit.
  {
    const RunResult r = run("pipeline --config /nonexistent.cfg");
    EXPECT(r.exit_code != 0, "missing config exits nonzero");
    EXPECT(r.err.rfind("[E_", 0) == 0, "stderr starts with the error code: " << r.err);
    EXPECT(r.err.find("\n") == r.err.size() - 1, "single-line error");
  }
  {
    const RunResult r = run("pipeline");
    EXPECT(r.exit_code != 0, "missing --config exits nonzero");
    EXPECT(r.err.rfind("[E_CONFIG]", 0) == 0, "config error prefix: " << r.err);
  }
  {
    const std::string bad = write_file(dir / "bad.cfg", "synth=/nope.cfg\nout=" +
                                                            (dir / "bad_out").string() +
                                                            "\n");
    const RunResult r = run("pipeline --config " + bad);
    EXPECT(r.exit_code == 3, "io error maps to exit 3, got " << r.exit_code);
    EXPECT(r.err.rfind("[E_IO]", 0) == 0, "io error prefix: " << r.err);
  }

  // Seed override flows into the report.
  {
    const RunResult r = run("ingest --config " + pipe + " --seed 123 --out " +
                            (dir / "run_seed").string());
    EXPECT(r.exit_code == 0, "seeded ingest exits 0; stderr: " << r.err);
    std::ifstream in(dir / "run_seed" / "stages" / "ingest.json");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT(ss.str().find("\"seed\": 123") != std::string::npos,
           "overridden seed recorded in the stage manifest");
  }

  if (failures == 0) {
    std::cout << "cli: all checks passed\n";
    return 0;
  }
  std::cerr << "cli: " << failures << " check(s) failed\n";
  return 1;
}
