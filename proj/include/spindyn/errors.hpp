#pragma once

#include <stdexcept>
#include <string>

namespace spindyn {

// Base for everything thrown by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input: malformed model files, inconsistent crystals, invalid options.
// The CLI maps these to exit code 1.
struct model_error : error {
  using error::error;
};

struct parse_error : model_error {
  int line = 0, column = 0;
  parse_error(const std::string& msg, int line_, int col_)
      : model_error(msg + " (line " + std::to_string(line_) + ", column " +
                    std::to_string(col_) + ")"),
        line(line_), column(col_) {}
};

// A coupling or configuration that violates the declared symmetry.
struct symmetry_error : model_error {
  using model_error::model_error;
};

// Numerical failure at run time: non-convergence, spurious modes, blow-ups.
// The CLI maps these to exit code 2.
struct numerical_error : error {
  using error::error;
};

// Fixed-point iteration of an implicit step did not contract.
struct integration_error : numerical_error {
  double residual = 0.0;
  integration_error(const std::string& msg, double res)
      : numerical_error(msg + " (residual " + std::to_string(res) + ")"),
        residual(res) {}
};

// Spin-wave Hamiltonian not positive semidefinite: the reference state is
// not a local minimum.
struct instability_error : numerical_error {
  using numerical_error::numerical_error;
};

} // namespace spindyn
