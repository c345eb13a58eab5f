#ifndef GRUSHIN_CONFIG_HPP
#define GRUSHIN_CONFIG_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grushin/grid.hpp"
#include "grushin/solvers.hpp"

namespace grushin {

enum class Command {
  best_constant,
  eigenvalue,
  brezis_nirenberg,
  decay,
  expansion,
  concentration,
  inequality_check,
};

std::string command_name(Command c);
std::optional<Command> command_from_name(const std::string& name);

/// One experiment: problem constants, grid, solver knobs, and the options of
/// the invoked command. Produced by parse_config, which validates everything
/// it can before any computation starts and reports all problems at once.
struct ExperimentConfig {
  Command command = Command::best_constant;

  // problem + grid (not used by inequality-check)
  int m = 1, n = 1;
  double gamma = 1.0, p = 2.0;
  std::vector<std::pair<double, double>> box;
  std::vector<int> cells;

  SolverConfig solver;
  bool dump_field = true;

  // best-constant
  std::string estimator = "single"; // single | extrapolated
  double scale_lo = 0.8, scale_hi = 1.2;

  // brezis-nirenberg
  double lambda = 0.0;
  std::string lambda_mode = "absolute"; // absolute | fraction_of_lambda1
  double q_exponent = 0.0;
  double s_estimate = 0.0; // <= 0: compute on the grid

  // decay / expansion / concentration inputs
  std::string field_in;
  double r_min = 0.0, r_max = 0.0;
  int n_annuli = 8;
  int boundary_margin_cells = 2;
  std::vector<double> eps_list = {0.4, 0.28, 0.2, 0.14, 0.1};
  double r_cut = 0.0;
  std::vector<double> rho_list;

  // inequality-check
  std::vector<double> p_list = {1.5, 2.0, 3.0};
  long samples = 100000;
  std::uint64_t seed2 = 1234567;

  /// The effective key/value map (defaults resolved), echoed into reports.
  std::map<std::string, std::string> echo() const;

  GrushinParams params() const;
  Grid grid() const;
};

/// Parse the flat `key = value` format. Unknown keys, missing required keys,
/// malformed values, and violated preconditions are all collected and thrown
/// together as one ValidationError.
ExperimentConfig parse_config(const std::string& text, Command command);
ExperimentConfig parse_config_file(const std::string& path, Command command);

} // namespace grushin

#endif
