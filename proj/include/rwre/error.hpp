#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

/// Bad input: malformed files, violated preconditions, out-of-domain queries.
/// The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method failed to reach its tolerance. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RWRE_DEFINE_ERROR(Name, Base)     \
  class Name : public Base {              \
   public:                                \
    using Base::Base;                     \
  };

RWRE_DEFINE_ERROR(RowSumError, ValidationError)
RWRE_DEFINE_ERROR(NonPositiveEntry, ValidationError)
RWRE_DEFINE_ERROR(InvariantViolation, ValidationError)
RWRE_DEFINE_ERROR(BoxTooSmall, ValidationError)
RWRE_DEFINE_ERROR(TooLarge, ValidationError)
RWRE_DEFINE_ERROR(CellMismatch, ValidationError)
RWRE_DEFINE_ERROR(NotInvariant, ValidationError)
RWRE_DEFINE_ERROR(NonConvexInput, ValidationError)
RWRE_DEFINE_ERROR(DomainError, ValidationError)
RWRE_DEFINE_ERROR(EdgeUndefined, ValidationError)
RWRE_DEFINE_ERROR(OutOfBox, ValidationError)
RWRE_DEFINE_ERROR(NotNearestNeighbor, ValidationError)
RWRE_DEFINE_ERROR(ClassKViolation, ValidationError)
RWRE_DEFINE_ERROR(Divergent, NumericalError)

#undef RWRE_DEFINE_ERROR

/// Carries the offending line (1-based, 0 if unknown) and field name.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, int line = 0, std::string field = {})
      : ValidationError(format(what, line, field)), line_(line), field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& field) {
    std::string msg = "parse error";
    if (line > 0) msg += " at line " + std::to_string(line);
    if (!field.empty()) msg += " in field '" + field + "'";
    return msg + ": " + what;
  }

  int line_;
  std::string field_;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(const std::string& what, long iterations)
      : NumericalError(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}

  long iterations() const { return iterations_; }

 private:
  long iterations_;
};

}  // namespace rwre
