#pragma once

#include <stdexcept>
#include <string>

namespace hybridfp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed-form trajectory reached the guard before the requested time.
class GuardCrossed : public Error {
 public:
  using Error::Error;
};

/// An initial density resolved onto too few cells.
class DegenerateSupport : public Error {
 public:
  using Error::Error;
};

class NewtonDiverged : public Error {
 public:
  using Error::Error;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (bad JSON, unknown key, out-of-range override).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridfp
