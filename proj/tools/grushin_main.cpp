// Batch experiment runner. One command per invocation:
//   grushin <command> --config <path> [--out <dir>] [--jobs N] [--seed S]
// Exit codes: 0 success, 2 validation error, 3 solver non-convergence,
// 4 I/O error. GRUSHIN_THREADS caps the data-parallel width.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "grushin/parallel.hpp"
#include "grushin/run.hpp"

namespace fs = std::filesystem;
using namespace grushin;

namespace {

int classify(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const SolverError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"grushin: variational laboratory for the degenerate critical problem"};
  app.require_subcommand(1);

  std::vector<std::string> config_paths;
  std::string out_dir = "grushin_out";
  int jobs = 1;
  long long seed_override = -1;

  std::vector<std::pair<CLI::App*, Command>> subs;
  for (Command c : {Command::best_constant, Command::eigenvalue, Command::brezis_nirenberg,
                    Command::decay, Command::expansion, Command::concentration,
                    Command::inequality_check}) {
    CLI::App* sub = app.add_subcommand(command_name(c), "");
    sub->add_option("--config", config_paths, "experiment config file(s)")
        ->required()
        ->expected(-1);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "run multiple configs concurrently");
    sub->add_option("--seed", seed_override, "override the config seed");
    subs.emplace_back(sub, c);
  }

  CLI11_PARSE(app, argc, argv);

  Command command = Command::best_constant;
  for (const auto& [sub, c] : subs)
    if (sub->parsed()) command = c;

  // parse and validate everything before any computation starts
  std::vector<ExperimentConfig> configs;
  try {
    for (const auto& path : config_paths) {
      ExperimentConfig cfg = parse_config_file(path, command);
      if (seed_override >= 0) cfg.solver.seed = std::uint64_t(seed_override);
      configs.push_back(std::move(cfg));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  }

  std::atomic<int> status{0};
  auto run_one = [&](std::size_t idx) {
    const fs::path base(out_dir);
    const fs::path dir =
        configs.size() == 1 ? base : base / fs::path(config_paths[idx]).stem();
    try {
      const RunReport rep = run(configs[idx], dir.string());
      std::printf("%s: ok (report %s)\n", config_paths[idx].c_str(),
                  (dir / "report.txt").c_str());
    } catch (const std::exception& e) {
      std::fprintf(stderr, "%s: error: %s\n", config_paths[idx].c_str(), e.what());
      int expected = 0;
      status.compare_exchange_strong(expected, classify(e));
    }
  };

  if (jobs <= 1 || configs.size() == 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const int width = std::min<std::size_t>(std::size_t(jobs), configs.size());
    for (int t = 0; t < width; ++t)
      pool.emplace_back([&]() {
        for (std::size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  return status.load();
}
