#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace rert::cli;

int main(int argc, char** argv) {
  CLI::App app{"Test-time re-routing of mixture-of-experts routing weights"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  bool retain = true;
  std::optional<std::string> bench_dir;

  if (const char* env = std::getenv("RERT_THREADS")) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      std::cerr << "RERT_THREADS must be an integer\n";
      return kExitUsage;
    }
  }

  auto* generate = app.add_subcommand("generate", "Generate the synthetic benchmark");
  auto* run = app.add_subcommand("run", "Evaluate strategies and sweeps");
  auto* report = app.add_subcommand("report", "Compare strategy summaries in a results directory");

  std::vector<CLI::Option*> seed_opts, out_opts, thread_opts, retain_opts;
  for (auto* sub : {generate, run}) {
    sub->add_option("--config", config_path, "YAML experiment config (defaults when omitted)")
        ->check(CLI::ExistingFile);
    seed_opts.push_back(sub->add_option("--seed", seed, "Experiment seed"));
    out_opts.push_back(sub->add_option("--out", out, "Output directory"));
    thread_opts.push_back(
        sub->add_option("--threads", threads, "Worker threads (env RERT_THREADS)")
            ->check(CLI::PositiveNumber));
    retain_opts.push_back(sub->add_flag("--retain-trajectories,!--no-retain-trajectories", retain,
                                        "Keep per-sample trajectories"));
  }
  run->add_option("--bench", bench_dir, "Directory written by a previous generate")
      ->check(CLI::ExistingDirectory);
  std::string results_dir;
  report->add_option("dir", results_dir, "Results directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (report->parsed()) return cmd_report(results_dir, std::cout, std::cerr);

  Overrides o;
  const bool gen = generate->parsed();
  const std::size_t i = gen ? 0 : 1;
  if (seed_opts[i]->count()) o.seed = seed;
  if (out_opts[i]->count()) o.out = out;
  if (thread_opts[i]->count() || std::getenv("RERT_THREADS")) o.threads = threads;
  if (retain_opts[i]->count()) o.retain_trajectories = retain;

  ExperimentConfig config;
  try {
    config = resolve_config(config_path, o);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  }
  return gen ? cmd_generate(config, std::cout, std::cerr)
             : cmd_run(config, bench_dir, std::cout, std::cerr);
}
