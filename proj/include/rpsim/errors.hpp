#pragma once

#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rpsim {

// Short general-format rendering of a real for diagnostics (1e-12, 0.05).
inline std::string to_text(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

// Bad arguments handed to a library function (wrong dimension, index out of
// range, unphysical parameter).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A run-time invariant broke during integration or sampling. Carries the step
// and the name of the quantity that failed so the CLI can report it.
class InvariantError : public std::runtime_error {
 public:
  InvariantError(std::string quantity, long step, const std::string& detail)
      : std::runtime_error("invariant '" + quantity + "' violated at step " +
                           std::to_string(step) + ": " + detail),
        quantity_(std::move(quantity)),
        step_(step) {}

  const std::string& quantity() const noexcept { return quantity_; }
  long step() const noexcept { return step_; }

 private:
  std::string quantity_;
  long step_;
};

// Rejected trajectory step when the reaction has already terminated.
class TerminatedReaction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rpsim
