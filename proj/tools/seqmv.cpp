// seqmv <experiment> --config path.toml --out dir --seed u64 [--replicas n] [--threads k]
// seqmv list

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "seqmv/seqmv.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sequential McKean-Vlasov experiments"};
  app.require_subcommand(1);

  app.add_subcommand("list", "print the experiment registry");

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t replicas = 0;
  unsigned threads = 1;
  std::vector<CLI::App*> runs;
  for (const auto& info : seqmv::experiment_registry()) {
    CLI::App* sub = app.add_subcommand(info.name, info.description);
    sub->add_option("--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "master seed (overrides rng.seed)")->required();
    sub->add_option("--replicas", replicas, "replica count override");
    sub->add_option("--threads", threads, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    runs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("list")) {
    for (const auto& info : seqmv::experiment_registry()) std::printf("%-20s %s\n", info.name.c_str(), info.description.c_str());
    return 0;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    seqmv::RunContext ctx{seqmv::parse_config(config_path).with_seed(seed), replicas, threads};
    const seqmv::RunManifest m = seqmv::run_experiment(name, ctx, out_dir);
    for (const auto& v : m.verdicts) std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.detail.c_str());
    std::printf("%s in %.1f s, outputs in %s\n", name.c_str(), m.wall_clock_seconds, out_dir.c_str());
    return m.all_pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
