#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace capacitylab {

// Base class for every error raised by the library. Callers that only care
// about "something went wrong in capacitylab" catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPath : public Error {
 public:
  using Error::Error;
};

class SupportViolation : public Error {
 public:
  using Error::Error;
};

class DegenerateCell : public Error {
 public:
  using Error::Error;
};

class SingularKernel : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

// Raised when the barrier solver runs out of iterations. Carries the best
// iterate so the caller can still inspect it.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, std::vector<double> best, double residual)
      : Error(what), best_iterate(std::move(best)), best_residual(residual) {}
  std::vector<double> best_iterate;
  double best_residual;
};

class UseGreedy : public Error {
 public:
  using Error::Error;
};

class InvalidInstance : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace capacitylab
