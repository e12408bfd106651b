#pragma once

// Experiment configuration and driver behind the `qstein` executable.
//
// Config files are line oriented: `key = value`, `# comment`, and
// `[psi]` / `[phi]` section headers for the two model definitions.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qstein/operators.hpp"
#include "qstein/states.hpp"

namespace qstein::cli {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& source, int line, const std::string& key, const std::string& message);
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

struct ModelConfig {
  std::string variant;  // iid | markov | rotated-markov | fcs | random
  std::vector<double> diag;
  std::optional<RealMatrix> matrix;
  std::optional<RealMatrix> transition;
  std::vector<double> pi;
  std::string rotation;  // "hadamard" or empty when rotation_matrix is used
  std::optional<RealMatrix> rotation_matrix;
  int dim = 2;
  int bond_dim = 2;
  std::optional<std::uint64_t> seed;
  int line = 0;
};

struct ExperimentConfig {
  std::string source = "<config>";
  std::string experiment;
  std::optional<int> n;
  std::optional<int> n_max;
  double epsilon = 0.1;
  double delta = 0.1;
  std::uint64_t seed = 1;
  int trials = 20;
  std::string output;  // CSV file name, relative to the output directory
  int l = 1;
  int lambda_grid = 200;
  std::optional<double> lambda_min;
  std::optional<double> lambda_max;
  Index dim_cap = kDefaultDimCap;
  std::optional<ModelConfig> psi;
  std::optional<ModelConfig> phi;
};

const std::vector<std::string>& experiment_names();

ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

StateModel build_model(const ModelConfig& m, const std::string& role);

// Range and presence checks, model construction and dimension-cap checks;
// nothing is allocated beyond the site models. Throws ConfigError or
// InvalidArgument / DimensionCapExceeded.
void validate(const ExperimentConfig& config);

struct RunResult {
  int exit_code = 0;  // 0 pass, 1 check failure, 2 error
  std::string summary;
  std::filesystem::path csv_path;
};

// Runs one experiment and writes its CSV into `out_dir`.
RunResult run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

}  // namespace qstein::cli
