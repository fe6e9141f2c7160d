#pragma once

#include <stdexcept>
#include <string>

namespace jumpvar {

// Bad or missing input data; the CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Numerical or algorithmic failure; exit code 1.
class ComputationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace jumpvar
