#pragma once

#include <stdexcept>
#include <string>

namespace tactorque {

// Precondition or invariant failure. Maps to exit code 2 in the CLI.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Filesystem or parse failure. Maps to exit code 3 in the CLI.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Friction identification on data without enough excitation.
struct IdentifiabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace tactorque
