#ifndef MEDEX_ERRORS_HPP
#define MEDEX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace medex {

//! Bad CLI flags, malformed config files, schema violations. Exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

//! An external evaluator process failed (crash, bad exit). Distinct from
//! infeasibility, which is a valid z=0 outcome. Exit code 3.
struct EvaluationError : std::runtime_error {
  explicit EvaluationError(const std::string& msg) : std::runtime_error(msg) {}
};

//! An external evaluator produced output we cannot parse.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

//! An iterative fit ran out of iterations. Carriers of partial results
//! derive from this (see classify::LogisticConvergenceError).
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace medex

#endif
