#pragma once

#include <stdexcept>
#include <string>

namespace petrirl {

// Malformed nets, instances, or mismatched inputs.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (firing a disabled transition,
// acting on a finished episode, selecting a masked-out action, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Distribution parameters or arguments outside their mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Raised by the trainer when a loss turns non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace petrirl
