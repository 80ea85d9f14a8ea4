#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mflab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed measures, out-of-range parameters, unknown ids.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Exact tensor enumeration would exceed the evaluation budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// Input is larger than an exact solver is allowed to handle.
class SizeLimitExceeded : public Error {
 public:
  using Error::Error;
};

// A declared bound or structural guarantee turned out to be false.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class RegistryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalBlowup : public Error {
 public:
  NumericalBlowup(const std::string& what, std::int64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

// A pilot run showed the requested replication count cannot resolve the signal.
class UnderpoweredExperiment : public Error {
 public:
  UnderpoweredExperiment(const std::string& what, std::int64_t required)
      : Error(what), required_reps_(required) {}
  std::int64_t required_replications() const noexcept { return required_reps_; }

 private:
  std::int64_t required_reps_;
};

}  // namespace mflab
