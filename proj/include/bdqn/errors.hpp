#pragma once

#include <stdexcept>
#include <string>

namespace bdqn {

/// Tensor or container dimensions disagree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation not allowed in the current object state (e.g. step after terminal).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace bdqn
