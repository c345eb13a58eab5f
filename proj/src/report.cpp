#include "grushin/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "grushin/errors.hpp"

namespace grushin {

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void RunReport::add_result(const std::string& key, double value) {
  results.emplace_back(key, format_full(value));
}

void RunReport::add_result(const std::string& key, const std::string& value) {
  results.emplace_back(key, value);
}

void RunReport::add_artifact(const std::string& name, const std::string& path) {
  artifacts.emplace_back(name, path);
}

std::string RunReport::render() const {
  std::ostringstream os;
  os << "GRUSHIN-REPORT v1\n";
  os << "schema_version = " << schema_version << '\n';
  os << "command = " << command << '\n';
  os << "wall_time_seconds = " << format_full(wall_time_seconds) << '\n';
  os << "[config]\n";
  for (const auto& [k, v] : config) os << k << " = " << v << '\n';
  os << "[results]\n";
  for (const auto& [k, v] : results) os << k << " = " << v << '\n';
  os << "[artifacts]\n";
  for (const auto& [k, v] : artifacts) os << k << " = " << v << '\n';
  return os.str();
}

void RunReport::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report to " + path);
  os << render();
  if (!os) throw IoError("write failure on " + path);
}

std::string report_comparable_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open report " + path);
  std::ostringstream out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("wall_time_seconds", 0) == 0) continue;
    out << line << '\n';
  }
  return out.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      os << (i ? "," : "") << format_full(row[i]);
    os << '\n';
  }
  if (!os) throw IoError("write failure on " + path);
}

} // namespace grushin
