#include <gtest/gtest.h>

#include <seqmv/experiments.hpp>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace seqmv;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("seqmv_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + SEQMV_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallCosine = R"(
[time]
t_end = 0.5
n_steps = 20
[kernel]
kind = "cosine_diff"
a = 1.0
[rng]
seed = 3
[experiment]
replicas = 24
i_list = [2, 4, 8]
)";

}  // namespace

TEST(Experiments, RegistryHasEveryExperiment) {
  const auto& reg = experiment_registry();
  EXPECT_EQ(reg.size(), 10u);
  for (const char* n : {"iid-benchmark", "rate-incremental", "weighted-rate", "weighted-threshold", "global-entropy",
                        "tail-chaos", "rate-empirical", "fluctuation", "pde-validate", "bench-marginal"}) {
    EXPECT_NO_THROW(find_experiment(n)) << n;
  }
}

TEST(Experiments, UnknownNameListsAvailable) {
  try {
    find_experiment("rate-global");
    FAIL() << "expected an error";
  } catch (const ExperimentError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("unknown experiment 'rate-global'"), std::string::npos);
    EXPECT_NE(msg.find("bench-marginal"), std::string::npos);
  }
}

TEST(Experiments, BenchMarginalCounts) {
  const fs::path dir = scratch("bench");
  RunContext ctx{parse_config_string("[time]\nt_end = 0.5\nn_steps = 10\n[kernel]\nkind = \"tanh_attract\"\n"
                                     "[experiment]\nn = 16\n"),
                 0, 1};
  const RunManifest m = run_experiment("bench-marginal", ctx, dir);
  ASSERT_EQ(m.verdicts.size(), 3u);
  EXPECT_TRUE(m.all_pass);
  // extend: 16 * 10, fresh run of 17: 10 * 16 * 17 / 2
  std::istringstream csv(slurp(dir / "results.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "N,extend_evals,resimulate_evals,ratio");
  double n, ext, resim, ratio;
  char comma;
  std::istringstream r(row);
  r >> n >> comma >> ext >> comma >> resim >> comma >> ratio;
  EXPECT_EQ(n, 16.0);
  EXPECT_EQ(ext, 160.0);
  EXPECT_EQ(resim, 1360.0);
  EXPECT_DOUBLE_EQ(ratio, 8.5);
}

TEST(Experiments, OutputsAndManifest) {
  const fs::path dir = scratch("outputs");
  RunContext ctx{parse_config_string(kSmallCosine), 0, 1};
  const RunManifest m = run_experiment("rate-incremental", ctx, dir);
  EXPECT_TRUE(fs::exists(dir / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "plotdata" / "R_i.csv"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["experiment"], "rate-incremental");
  EXPECT_EQ(manifest["seed"], 3u);
  EXPECT_EQ(manifest["config_hash"], config_hash(kSmallCosine));
  EXPECT_EQ(manifest["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(manifest["all_pass"].get<bool>(), m.all_pass);
  EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_FALSE(summary.contains("wall_clock_seconds"));
}

TEST(Experiments, ResultsIndependentOfThreads) {
  const fs::path a = scratch("threads1");
  const fs::path b = scratch("threads3");
  run_experiment("rate-incremental", RunContext{parse_config_string(kSmallCosine), 0, 1}, a);
  run_experiment("rate-incremental", RunContext{parse_config_string(kSmallCosine), 0, 3}, b);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
  EXPECT_EQ(slurp(a / "summary.json"), slurp(b / "summary.json"));
  EXPECT_EQ(slurp(a / "plotdata" / "R_i.csv"), slurp(b / "plotdata" / "R_i.csv"));
}

TEST(Experiments, SeedChangesResults) {
  const fs::path a = scratch("seed3");
  const fs::path b = scratch("seed4");
  const ParsedConfig p = parse_config_string(kSmallCosine);
  run_experiment("rate-incremental", RunContext{p, 0, 1}, a);
  run_experiment("rate-incremental", RunContext{p.with_seed(4), 0, 1}, b);
  EXPECT_NE(slurp(a / "results.csv"), slurp(b / "results.csv"));
}

TEST(Experiments, ZeroKernelSkipsFit) {
  const fs::path dir = scratch("zero");
  RunContext ctx{parse_config_string("[time]\nt_end = 0.5\nn_steps = 10\n[experiment]\nreplicas = 8\n"
                                     "i_list = [2, 4, 8]\n"),
                 0, 1};
  const RunManifest m = run_experiment("rate-incremental", ctx, dir);
  EXPECT_TRUE(m.verdicts.empty());
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["results"]["fit"]["skipped"], "degenerate zero series");
  EXPECT_EQ(summary["results"]["R_1"].get<double>(), 0.0);
}

TEST(Experiments, ReplicaOverride) {
  RunContext ctx{parse_config_string(kSmallCosine), 5, 1};
  EXPECT_EQ(ctx.replicas(100), 5u);
  ctx.replicas_override = 0;
  EXPECT_EQ(ctx.replicas(100), 24u);
}

TEST(Cli, ListPrintsRegistry) {
  const fs::path dir = scratch("cli_list");
  ASSERT_EQ(run_cli("list", dir / "log.txt"), 0);
  const std::string out = slurp(dir / "log.txt");
  for (const auto& e : experiment_registry()) EXPECT_NE(out.find(e.name), std::string::npos) << e.name;
}

TEST(Cli, RunWritesOutputsAndReportsVerdicts) {
  const fs::path dir = scratch("cli_run");
  const fs::path cfg = write_file(dir, "bench.toml",
                                  "[time]\nt_end = 0.5\nn_steps = 10\n[kernel]\nkind = \"tanh_attract\"\n"
                                  "[experiment]\nn = 8\n");
  const int code = run_cli("bench-marginal --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() +
                               "\" --seed 12",
                           dir / "log.txt");
  EXPECT_EQ(code, 0) << slurp(dir / "log.txt");
  EXPECT_NE(slurp(dir / "log.txt").find("PASS  extension equals fresh run"), std::string::npos);
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 12u);
}

TEST(Cli, ExitCodeTracksVerdicts) {
  // with a handful of replicas the slope fit may or may not pass; the exit code must agree with the manifest
  const fs::path dir = scratch("cli_verdict");
  const fs::path cfg = write_file(dir, "rate.toml", kSmallCosine);
  const int code = run_cli("rate-incremental --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() +
                               "\" --seed 3 --replicas 4",
                           dir / "log.txt");
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(code, manifest["all_pass"].get<bool>() ? 0 : 1);
  EXPECT_EQ(manifest["replicas_override"], 4u);
}

TEST(Cli, ErrorsExitTwo) {
  const fs::path dir = scratch("cli_err");
  const fs::path bad = write_file(dir, "bad.toml", "[time]\nt_end = 1.0\nn_steps = 10\n[kernel]\nkind = \"foo\"\n");
  EXPECT_EQ(run_cli("rate-incremental --config \"" + bad.string() + "\" --out \"" + (dir / "o").string() +
                        "\" --seed 1",
                    dir / "log.txt"),
            2);
  EXPECT_NE(slurp(dir / "log.txt").find("valid kinds"), std::string::npos);
  // CLI11 reports usage errors with its own nonzero code
  EXPECT_NE(run_cli("rate-incremental --out x --seed 1", dir / "log2.txt"), 0);
  EXPECT_NE(run_cli("no-such-experiment", dir / "log3.txt"), 0);
}
