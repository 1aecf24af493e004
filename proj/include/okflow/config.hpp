// config.hpp
// Flat key=value run configuration with experiment presets.
#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "okflow/model.hpp"
#include "okflow/scheme.hpp"
#include "okflow/solve.hpp"

namespace okflow {

struct RunConfig {
  int version = 1;
  std::string experiment = "none";  // exp1 | exp2 | exp3 | none
  int dim = 2;
  int n = 100;
  double tau = 1e-2;
  double t_end = 1.0;
  double kappa = 0.0;
  std::vector<double> kappa_list;  // compare sweeps
  double epsilon_sq = 1e-3;
  std::string model = "quartic";
  std::string forcing = "none";  // none | logistic
  std::string initial = "cosine2d";  // cosine2d | uniform3d | constant:<v>
  std::uint64_t seed = 0;
  double mobility_floor = 1e-14;
  std::string output_dir = "out";
  int output_stride = 10;
  std::string solver = "direct";  // direct | cg
  double solver_rel_tol = 1e-10;
  double solver_abs_tol = 1e-14;
  int solver_max_iter = 0;
  double newton_rel_tol = 1e-10;
  double newton_abs_tol = 1e-12;
  int newton_max_iter = 25;
  std::optional<double> entropy_delta;
  int threads = 0;  // 0: hardware concurrency
  // convergence study
  std::vector<int> levels = {1, 2, 3, 4};
  int reference_level = 5;
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + value);
  }
}

inline long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: bad integer value for '" + key + "': " + value);
  }
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) parts.push_back(item);
  return parts;
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  if (name == "exp1") {
    cfg.dim = 2;
    cfg.n = 100;
    cfg.tau = 1e-2;
    cfg.t_end = 5.0;
    cfg.forcing = "none";
    cfg.initial = "cosine2d";
    cfg.kappa_list = {0.0, 10.0, 100.0};
  } else if (name == "exp2") {
    cfg.dim = 2;
    cfg.n = 100;
    cfg.tau = 1e-2;
    cfg.t_end = 5.0;
    cfg.forcing = "logistic";
    cfg.initial = "cosine2d";
    cfg.kappa_list = {0.0, 10.0, 100.0};
  } else if (name == "exp3") {
    cfg.dim = 3;
    cfg.n = 16;
    cfg.tau = 1e-2;
    cfg.t_end = 0.5;
    cfg.forcing = "logistic";
    cfg.initial = "uniform3d";
    cfg.kappa_list = {0.0, 100.0};
  } else if (name != "none") {
    throw ConfigError("config: unknown experiment preset '" + name + "'");
  }
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key=value: " + line);
    pairs.emplace_back(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }

  RunConfig cfg;
  bool saw_version = false;
  // presets first so explicit keys override them regardless of order
  for (const auto& [key, value] : pairs) {
    if (key == "experiment") {
      cfg.experiment = value;
      detail::apply_preset(cfg, value);
    }
  }
  for (const auto& [key, value] : pairs) {
    if (key == "version") {
      cfg.version = static_cast<int>(detail::parse_int(key, value));
      if (cfg.version != 1)
        throw ConfigError("config: unsupported version " + value);
      saw_version = true;
    } else if (key == "experiment") {
      // handled above
    } else if (key == "dim") {
      cfg.dim = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "n") {
      cfg.n = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "tau") {
      cfg.tau = detail::parse_real(key, value);
    } else if (key == "t_end") {
      cfg.t_end = detail::parse_real(key, value);
    } else if (key == "kappa") {
      cfg.kappa = detail::parse_real(key, value);
    } else if (key == "kappa_list") {
      cfg.kappa_list.clear();
      for (const auto& item : detail::split_list(value))
        cfg.kappa_list.push_back(detail::parse_real(key, item));
    } else if (key == "epsilon_sq") {
      cfg.epsilon_sq = detail::parse_real(key, value);
    } else if (key == "model") {
      if (value != "quartic")
        throw ConfigError("config: unknown model '" + value + "'");
      cfg.model = value;
    } else if (key == "forcing") {
      if (value != "none" && value != "logistic")
        throw ConfigError("config: unknown forcing '" + value + "'");
      cfg.forcing = value;
    } else if (key == "initial") {
      cfg.initial = value;
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    } else if (key == "mobility_floor") {
      cfg.mobility_floor = detail::parse_real(key, value);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "output_stride") {
      cfg.output_stride = static_cast<int>(detail::parse_int(key, value));
      if (cfg.output_stride < 1)
        throw ConfigError("config: output_stride must be >= 1");
    } else if (key == "solver") {
      if (value != "cg" && value != "direct")
        throw ConfigError("config: unknown solver '" + value + "'");
      cfg.solver = value;
    } else if (key == "solver_rel_tol") {
      cfg.solver_rel_tol = detail::parse_real(key, value);
    } else if (key == "solver_abs_tol") {
      cfg.solver_abs_tol = detail::parse_real(key, value);
    } else if (key == "solver_max_iter") {
      cfg.solver_max_iter = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "newton_rel_tol") {
      cfg.newton_rel_tol = detail::parse_real(key, value);
    } else if (key == "newton_abs_tol") {
      cfg.newton_abs_tol = detail::parse_real(key, value);
    } else if (key == "newton_max_iter") {
      cfg.newton_max_iter = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "entropy_delta") {
      cfg.entropy_delta = detail::parse_real(key, value);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "levels") {
      cfg.levels.clear();
      for (const auto& item : detail::split_list(value))
        cfg.levels.push_back(static_cast<int>(detail::parse_int(key, item)));
    } else if (key == "reference_level") {
      cfg.reference_level = static_cast<int>(detail::parse_int(key, value));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!saw_version) throw ConfigError("config: missing required key 'version'");
  if (cfg.dim != 2 && cfg.dim != 3) throw ConfigError("config: dim must be 2 or 3");
  if (cfg.n < 1) throw ConfigError("config: n must be >= 1");
  if (!(cfg.tau > 0.0)) throw ConfigError("config: tau must be positive");
  if (cfg.t_end < 0.0) throw ConfigError("config: t_end must be nonnegative");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

inline ModelSpec build_model(const RunConfig& cfg) {
  if (cfg.model != "quartic")
    throw ConfigError("config: unknown model '" + cfg.model + "'");
  ModelSpec spec = builtin_quartic_model();
  spec.epsilon_sq = cfg.epsilon_sq;
  spec.kappa = cfg.kappa;
  spec.forcing = cfg.forcing == "logistic" ? logistic_forcing() : zero_forcing();
  spec.mobility_floor = cfg.mobility_floor;
  if (cfg.mobility_floor > 1e-14) {
    // explicit conditioning aid: lift the mobility to the configured floor
    const ScalarMap base = spec.mobility;
    const double floor = cfg.mobility_floor;
    spec.mobility = [base, floor](double x) {
      return std::max(base(x), floor);
    };
  }
  spec.delta = cfg.entropy_delta;
  return spec;
}

inline SchemeConfig build_scheme_config(const RunConfig& cfg) {
  SchemeConfig sc;
  sc.tau = cfg.tau;
  sc.t_end = cfg.t_end;
  sc.newton_rel_tol = cfg.newton_rel_tol;
  sc.newton_abs_tol = cfg.newton_abs_tol;
  sc.newton_max_iter = cfg.newton_max_iter;
  return sc;
}

inline SolveOptions build_solver_options(const RunConfig& cfg) {
  SolveOptions opts;
  opts.method = cfg.solver == "direct" ? SolveOptions::Method::direct
                                       : SolveOptions::Method::cg;
  opts.rel_tolerance = cfg.solver_rel_tol;
  opts.abs_tolerance = cfg.solver_abs_tol;
  opts.max_iterations = cfg.solver_max_iter;
  return opts;
}

inline FieldVector build_initial(const RunConfig& cfg,
                                 const SimplicialMesh& mesh) {
  if (cfg.initial == "cosine2d")
    return initial_field(mesh, InitialKind::cosine2d, cfg.seed);
  if (cfg.initial == "uniform3d")
    return initial_field(mesh, InitialKind::uniform3d, cfg.seed);
  if (cfg.initial.rfind("constant:", 0) == 0) {
    const double v =
        detail::parse_real("initial", cfg.initial.substr(9));
    return initial_field(mesh, InitialKind::constant, cfg.seed, v);
  }
  throw ConfigError("config: unknown initial condition '" + cfg.initial + "'");
}

}  // namespace okflow
