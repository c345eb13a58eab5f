#ifndef GRUSHIN_REPORT_HPP
#define GRUSHIN_REPORT_HPP

#include <string>
#include <utility>
#include <vector>

namespace grushin {

/// Machine-readable run record: self-describing structured text with the
/// effective configuration echoed so a run is re-creatable from its report.
/// Byte-identical across reruns of the same config and seed, except for the
/// wall_time_seconds line.
struct RunReport {
  int schema_version = 1;
  std::string command;
  double wall_time_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> config;    // echoed, sorted
  std::vector<std::pair<std::string, std::string>> results;   // insertion order
  std::vector<std::pair<std::string, std::string>> artifacts; // name -> path

  void add_result(const std::string& key, double value);
  void add_result(const std::string& key, const std::string& value);
  void add_artifact(const std::string& name, const std::string& path);

  std::string render() const;
  void write(const std::string& path) const;
};

/// Reads a report back and strips the wall-time line; used by reproducibility
/// checks ("byte-identical modulo wall time").
std::string report_comparable_text(const std::string& path);

/// 17-significant-digit formatting used everywhere numbers are persisted.
std::string format_full(double v);

/// Two-or-more-column numeric text series (plot data / CSV).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

} // namespace grushin

#endif
