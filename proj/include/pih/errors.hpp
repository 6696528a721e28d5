#pragma once

#include <stdexcept>
#include <string>

namespace pih {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidGeometryError : Error {
  using Error::Error;
};

struct UnsupportedCornerError : Error {
  using Error::Error;
};

struct PreconditionError : Error {
  using Error::Error;
};

struct InvalidCommandError : Error {
  using Error::Error;
};

struct ProjectionUndefinedError : Error {
  using Error::Error;
};

struct DegenerateRegionError : Error {
  using Error::Error;
};

struct EmptyWellError : Error {
  using Error::Error;
};

struct InfeasiblePlanError : Error {
  using Error::Error;
};

struct NumericalConditioningError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pih
