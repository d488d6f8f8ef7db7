#pragma once

#include <stdexcept>
#include <string>

namespace cpdlp {

// Invalid parameters, kernels or configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A request that would exceed the memory budget or an enumeration limit.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, double required)
      : std::runtime_error(what), required_(required) {}
  double required() const { return required_; }

 private:
  double required_;
};

// A series that cannot be certified finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A coupling premise or containment identity failed at runtime.
class CouplingViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Query outside the simulated window.
class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace cpdlp
