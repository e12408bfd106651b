#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qstein/cli.hpp"
#include "qstein/errors.hpp"
#include "qstein/random.hpp"

namespace qstein::cli {

ConfigError::ConfigError(const std::string& source, int line, const std::string& key, const std::string& message)
    : std::invalid_argument(source + ":" + std::to_string(line) + ": " + (key.empty() ? "" : "'" + key + "': ") +
                            message),
      line_(line),
      key_(key) {}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"entropy-rates", "pinch-audit",   "np-curve",     "stein-scan",
                                              "aep-classical", "qaep-build",    "ergodic-audit"};
  return names;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

struct Parser {
  std::string source;
  int line = 0;
  std::string key;

  [[noreturn]] void fail(const std::string& message) const { throw ConfigError(source, line, key, message); }

  double real(const std::string& v) const {
    if (v.empty()) fail("expected a number");
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size() || !std::isfinite(x)) fail("not a finite number: '" + v + "'");
    return x;
  }

  long long integer(const std::string& v) const {
    if (v.empty()) fail("expected an integer");
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(v, &used);
    } catch (const std::exception&) {
      fail("not an integer: '" + v + "'");
    }
    if (used != v.size()) fail("not an integer: '" + v + "'");
    return x;
  }

  int positive_int(const std::string& v) const {
    const long long x = integer(v);
    if (x < 1 || x > 1'000'000'000) fail("must be a positive integer");
    return static_cast<int>(x);
  }

  std::uint64_t seed(const std::string& v) const {
    const long long x = integer(v);
    if (x < 0) fail("seed must be nonnegative");
    return static_cast<std::uint64_t>(x);
  }

  std::vector<double> list(const std::string& v) const {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) out.push_back(real(item));
    if (out.empty()) fail("expected a comma-separated list");
    return out;
  }

  // Rows separated by ';', entries by ','.
  RealMatrix matrix(const std::string& v) const {
    std::vector<std::vector<double>> rows;
    for (const auto& r : split(v, ';'))
      if (!r.empty()) rows.push_back(list(r));
    if (rows.empty()) fail("expected a matrix");
    const std::size_t cols = rows.front().size();
    RealMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) fail("matrix rows have different lengths");
      for (std::size_t j = 0; j < cols; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return m;
  }
};

void set_model_key(Parser& p, ModelConfig& m, const std::string& key, const std::string& value) {
  if (key == "variant") {
    static const std::vector<std::string> allowed{"iid", "markov", "rotated-markov", "fcs", "random"};
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end())
      p.fail("unknown variant '" + value + "' (iid, markov, rotated-markov, fcs, random)");
    m.variant = value;
  } else if (key == "diag") {
    m.diag = p.list(value);
  } else if (key == "matrix") {
    m.matrix = p.matrix(value);
  } else if (key == "transition") {
    m.transition = p.matrix(value);
  } else if (key == "pi") {
    m.pi = p.list(value);
  } else if (key == "rotation") {
    if (value == "hadamard") m.rotation = value;
    else m.rotation_matrix = p.matrix(value);
  } else if (key == "dim") {
    m.dim = p.positive_int(value);
  } else if (key == "bond_dim") {
    m.bond_dim = p.positive_int(value);
  } else if (key == "seed") {
    m.seed = p.seed(value);
  } else {
    p.fail("unknown key");
  }
}

void set_top_key(Parser& p, ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "experiment") {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), value) == names.end()) p.fail("unknown experiment '" + value + "'");
    c.experiment = value;
  } else if (key == "n") {
    c.n = p.positive_int(value);
  } else if (key == "n_max") {
    c.n_max = p.positive_int(value);
  } else if (key == "epsilon") {
    c.epsilon = p.real(value);
  } else if (key == "delta") {
    c.delta = p.real(value);
  } else if (key == "seed") {
    c.seed = p.seed(value);
  } else if (key == "trials") {
    c.trials = p.positive_int(value);
  } else if (key == "output") {
    if (value.empty() || value.find('/') != std::string::npos) p.fail("output must be a plain file name");
    c.output = value;
  } else if (key == "l") {
    c.l = p.positive_int(value);
  } else if (key == "lambda_grid") {
    c.lambda_grid = p.positive_int(value);
  } else if (key == "lambda_min") {
    c.lambda_min = p.real(value);
  } else if (key == "lambda_max") {
    c.lambda_max = p.real(value);
  } else if (key == "dim_cap") {
    c.dim_cap = p.positive_int(value);
  } else {
    p.fail("unknown key");
  }
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  c.source = source;
  Parser p;
  p.source = source;
  std::map<std::string, int> seen;
  std::string section;
  std::string raw;
  while (std::getline(in, raw)) {
    ++p.line;
    p.key.clear();
    const auto hash = raw.find('#');
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') p.fail("malformed section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "psi" && section != "phi") p.fail("unknown section [" + section + "]");
      auto& slot = section == "psi" ? c.psi : c.phi;
      if (slot) p.fail("duplicate section [" + section + "]");
      slot.emplace();
      slot->line = p.line;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) p.fail("expected 'key = value'");
    p.key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (p.key.empty()) p.fail("empty key");
    const std::string qualified = section.empty() ? p.key : section + "." + p.key;
    if (seen.count(qualified)) p.fail("duplicate key (first set on line " + std::to_string(seen[qualified]) + ")");
    seen[qualified] = p.line;
    if (section.empty()) set_top_key(p, c, p.key, value);
    else set_model_key(p, section == "psi" ? *c.psi : *c.phi, p.key, value);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

namespace {

Matrix complex_of(const RealMatrix& m) { return m.cast<Complex>(); }

Matrix rotation_of(const ModelConfig& m) {
  if (m.rotation == "hadamard") {
    if (m.transition && m.transition->rows() != 2) throw InvalidArgument("hadamard rotation needs a 2-state chain");
    Matrix h(2, 2);
    h << 1.0, 1.0, 1.0, -1.0;
    return h / std::sqrt(2.0);
  }
  if (m.rotation_matrix) return complex_of(*m.rotation_matrix);
  throw InvalidArgument("rotated-markov model needs 'rotation'");
}

DensityOperator site_density(const ModelConfig& m) {
  if (!m.diag.empty() && m.matrix) throw InvalidArgument("give either 'diag' or 'matrix', not both");
  if (!m.diag.empty()) return DensityOperator::diagonal(m.diag);
  if (m.matrix) return DensityOperator(complex_of(*m.matrix));
  throw InvalidArgument("i.i.d. model needs 'diag' or 'matrix'");
}

std::optional<std::vector<double>> optional_pi(const ModelConfig& m) {
  if (m.pi.empty()) return std::nullopt;
  return m.pi;
}

}  // namespace

StateModel build_model(const ModelConfig& m, const std::string& role) {
  try {
    if (m.variant == "iid") return StateModel::iid(site_density(m));
    if (m.variant == "markov") {
      if (!m.transition) throw InvalidArgument("markov model needs 'transition'");
      return StateModel::markov(*m.transition, optional_pi(m));
    }
    if (m.variant == "rotated-markov") {
      if (!m.transition) throw InvalidArgument("rotated-markov model needs 'transition'");
      return StateModel::rotated_markov(*m.transition, rotation_of(m), optional_pi(m));
    }
    if (m.variant == "fcs") {
      Rng rng(m.seed.value_or(1));
      return StateModel::random_finitely_correlated(m.dim, m.bond_dim, rng);
    }
    if (m.variant == "random") throw InvalidArgument("variant 'random' only describes per-trial states");
    throw InvalidArgument("missing 'variant'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("[" + role + "]", m.line, "", e.what());
  }
}

}  // namespace qstein::cli
