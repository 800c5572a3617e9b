#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mamlode {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorKind {
  dimension_mismatch,
  invalid_argument,
  invalid_pool,
  non_finite,
  not_strongly_convex,
  hypothesis_violated,
  io,
  parse,
  config,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; kind() lets callers map failures to
// exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Selects the OpenMP kernel or the serial reference loop. Both reduce in task
// order, so results are bitwise identical.
enum class Exec { serial, parallel };

}  // namespace mamlode
