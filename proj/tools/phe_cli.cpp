// Command-line front end: run or sweep an experiment config, or re-plot CSVs.
//
//   phe run   <config.json> [--out DIR] [--seeds 0,1,2]
//   phe sweep <config.json> [--out DIR] [--seeds 0,1,2]
//   phe plot  <results.csv>... [--out DIR]

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "phe/harness.hpp"
#include "phe/plot.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw phe::InputError("--seeds: '" + item + "' is not a nonnegative integer");
    }
  }
  if (seeds.empty()) throw phe::InputError("--seeds must list at least one seed");
  return seeds;
}

int execute(const std::string& config_path, const std::string& out_override, const std::string& seeds_override,
            int threads, bool expand) {
  phe::ExperimentConfig cfg = phe::load_config(config_path);
  if (!out_override.empty()) cfg.run.out_dir = out_override;
  if (!seeds_override.empty()) cfg.run.seeds = parse_seed_list(seeds_override);
  if (threads > 0) cfg.run.threads = threads;

  std::error_code ec;
  std::filesystem::create_directories(cfg.run.out_dir, ec);
  if (ec) throw phe::IoError("cannot create output directory " + cfg.run.out_dir + ": " + ec.message());

  const phe::RunResult result = phe::run_sweep(cfg, expand);
  const std::string csv = (std::filesystem::path(cfg.run.out_dir) / "results.csv").string();
  phe::emit_csv(result, csv);
  std::cout << "wrote " << result.rows.size() << " rows to " << csv << '\n';
  if (cfg.run.plots)
    for (const auto& path : phe::emit_plots(result, cfg.run.out_dir)) std::cout << "wrote " << path << '\n';
  return 0;
}

int plot(const std::vector<std::string>& csvs, const std::string& out_dir) {
  phe::RunResult merged;
  for (const auto& path : csvs) {
    phe::RunResult part = phe::parse_csv(path);
    merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
  }
  for (const auto& path : phe::emit_plots(merged, out_dir)) std::cout << "wrote " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed-history exploration experiments on tabular benchmarks"};
  app.require_subcommand(1);

  std::string out_dir, seeds;
  int threads = 0;
  app.add_option("--out", out_dir, "Output directory (overrides run.out)");
  app.add_option("--seeds", seeds, "Comma-separated seeds (overrides run.seeds)");
  app.add_option("--threads", threads, "Worker threads (0: one per core)");

  std::string run_config, sweep_config;
  auto* run_cmd = app.add_subcommand("run", "Run the base agents of a config");
  run_cmd->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the full sweep grid of a config");
  sweep_cmd->add_option("config", sweep_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  std::vector<std::string> csvs;
  auto* plot_cmd = app.add_subcommand("plot", "Render SVG plots from result CSVs");
  plot_cmd->add_option("csv", csvs, "Result CSV files")->required()->check(CLI::ExistingFile);

  // Global flags may also follow the subcommand.
  for (auto* sub : {run_cmd, sweep_cmd, plot_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return execute(run_config, out_dir, seeds, threads, false);
    if (sweep_cmd->parsed()) return execute(sweep_config, out_dir, seeds, threads, true);
    if (plot_cmd->parsed()) return plot(csvs, out_dir.empty() ? "." : out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
