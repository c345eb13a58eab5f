#ifndef GRUSHIN_RUN_HPP
#define GRUSHIN_RUN_HPP

#include "grushin/config.hpp"
#include "grushin/report.hpp"

namespace grushin {

/// Executes one experiment: dispatches to the solvers/analysis, writes the
/// report, field dumps, and plot-data series under `out_dir`, and returns the
/// report. Solver failures propagate as SolverError with the partial trace
/// recorded in a report that is still written (status = failed).
RunReport run(const ExperimentConfig& config, const std::string& out_dir);

} // namespace grushin

#endif
