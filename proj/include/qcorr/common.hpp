#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qcorr {

using Vector15 = Eigen::Matrix<double, 15, 1>;
using Matrix15 = Eigen::Matrix<double, 15, 15>;

/// Input failed structural validation (shape, symmetry, range, schema).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constrained fit could not reach the requested target value.
class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qcorr
