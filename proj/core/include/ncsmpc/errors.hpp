#pragma once

#include <stdexcept>
#include <string>

namespace ncsmpc {

/// Argument outside the documented domain of an operation.
class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// A model was evaluated outside the region where it is defined
/// (e.g. non-positive reactor temperature).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// A bracketed denominator of a bound formula is not strictly positive.
class DegenerateDenominator : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A closed-form bound is undefined for the given parameters.
class UndefinedBound : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// The requested target cannot be reached for any admissible argument.
class Unattainable : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// The actuator has no buffered control covering the current time.
class Starvation : public std::runtime_error
{
public:
  Starvation(const std::string & what, double time) : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

private:
  double time_;
};

/// The controller buffer does not describe the input on the requested interval.
class CoverageGap : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A run record lacks a value needed for post-processing.
class MissingValue : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace ncsmpc
