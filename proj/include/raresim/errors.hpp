#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace raresim {

// Invalid or inconsistent configuration (unknown potential id, bad grid, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke an operation's precondition (shape mismatch, empty input, ...).
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// A trajectory left the representable range (drift blow-up).
struct SimulationDiverged : std::runtime_error {
  int step;
  explicit SimulationDiverged(int step_)
      : std::runtime_error("simulation diverged at step " + std::to_string(step_)), step(step_) {}
};

// Forward pass of the bias network produced a non-finite value.
struct NumericOverflow : std::runtime_error {
  explicit NumericOverflow(const std::string& msg) : std::runtime_error(msg) {}
};

// Minima search found no admissible minimum.
struct SearchFailure : std::runtime_error {
  explicit SearchFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative linear solve did not reach the requested tolerance.
struct SolverError : std::runtime_error {
  std::vector<double> residual_history;
  SolverError(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
};

// More than the tolerated fraction of training steps lost to divergence.
struct TrainingUnstable : std::runtime_error {
  explicit TrainingUnstable(const std::string& msg) : std::runtime_error(msg) {}
};

// Diagnostics requested on degenerate data (all-zero weights, zero mean).
struct UndefinedStatistic : std::runtime_error {
  explicit UndefinedStatistic(const std::string& msg) : std::runtime_error(msg) {}
};

// File parse/format problems; carries a 1-based line number when known.
struct ParseError : std::runtime_error {
  long line = 0;
  ParseError(const std::string& msg, long line_)
      : std::runtime_error(msg + " (line " + std::to_string(line_) + ")"), line(line_) {}
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible dataset headers during a merge; message lists the fields.
struct MergeConflict : std::runtime_error {
  explicit MergeConflict(const std::string& msg) : std::runtime_error(msg) {}
};

// Point lies outside a grid field's domain.
struct OutOfDomain : std::runtime_error {
  explicit OutOfDomain(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace raresim
