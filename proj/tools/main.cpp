#include <iostream>

#include "CLI11.hpp"
#include "qstein/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qstein: finite-blocklength quantum hypothesis testing experiments"};
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool check_only = false;
  app.add_option("--config", config_path, "Experiment configuration file")->required();
  app.add_option("--out", out_dir, "Directory for CSV output");
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_flag("--check-only", check_only, "Validate the configuration and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  qstein::cli::ExperimentConfig config;
  try {
    config = qstein::cli::load_config(config_path);
    if (seed) config.seed = *seed;
    if (check_only) {
      qstein::cli::validate(config);
      std::cout << config.experiment << ": config OK\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  const qstein::cli::RunResult r = qstein::cli::run(config, out_dir);
  (r.exit_code == 2 ? std::cerr : std::cout) << r.summary << '\n';
  if (r.exit_code != 2) std::cout << "wrote " << r.csv_path.string() << '\n';
  return r.exit_code;
}
