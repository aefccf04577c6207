#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "d2d/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"D2D spectrum pricing solver and Monte Carlo simulator"};
  std::string config_path, out_dir, command;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--command", command, "solve-rb | price-search | experiment | sweep | oracle-check");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : d2d::cli::kExitConfig;
  }

  d2d::cli::RunConfig cfg;
  try {
    std::string text;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw d2d::ConfigError("cannot read " + config_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    cfg = d2d::cli::parse_config(text);
  } catch (const d2d::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return d2d::cli::kExitConfig;
  }
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (!command.empty()) cfg.command = command;
  if (seed_opt->count()) cfg.scenario.seed = seed;
  return d2d::cli::run(cfg);
}
