#pragma once

#include <stdexcept>
#include <string>

namespace afpca {

/// Pipeline stage that raised an error; used to tag CLI messages.
enum class Stage {
  Input,
  Presmoothing,
  Regularity,
  Moments,
  RiskBounds,
  Covariance,
  Eigen,
  Simulation,
  Evaluation,
};

inline const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Input: return "input";
    case Stage::Presmoothing: return "presmoothing";
    case Stage::Regularity: return "regularity";
    case Stage::Moments: return "moments";
    case Stage::RiskBounds: return "risk_bounds";
    case Stage::Covariance: return "covariance";
    case Stage::Eigen: return "eigen";
    case Stage::Simulation: return "simulation";
    case Stage::Evaluation: return "evaluation";
  }
  return "unknown";
}

/// Malformed files or records. Carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// A bandwidth, window or design that leaves some estimate undefined.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(Stage stage, const std::string& what)
      : std::runtime_error(std::string("[") + to_string(stage) + "] " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// Factorization or eigensolver breakdown.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(Stage stage, const std::string& what)
      : std::runtime_error(std::string("[") + to_string(stage) + "] " + what), stage_(stage) {}
  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

}  // namespace afpca
