#ifndef GRUSHIN_ERRORS_HPP
#define GRUSHIN_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace grushin {

/// Invalid parameters, preconditions, or configuration input.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
  ValidationError(const std::string& msg, std::vector<std::string> issues)
      : std::runtime_error(msg), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

private:
  std::vector<std::string> issues_;
};

/// Iterative solver failure. Carries the objective trace up to the failure.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& msg, std::vector<std::pair<int, double>> trace = {})
      : std::runtime_error(msg), trace_(std::move(trace)) {}
  const std::vector<std::pair<int, double>>& trace() const { return trace_; }

private:
  std::vector<std::pair<int, double>> trace_;
};

/// File format / filesystem failure.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace grushin

#endif
