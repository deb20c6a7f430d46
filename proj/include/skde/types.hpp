#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace skde {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ArrayX = Eigen::ArrayXd;

/// Bad call-site input: wrong dimension, unknown token, indivisible N, ...
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A family map evaluated outside its domain (e.g. log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Input data cannot support the requested statistic (zero variance, m < 2).
class DegenerateDataError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// An integration grid misses too much of the mass it was asked to cover.
class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computed quantity violates a mathematical guarantee beyond tolerance.
class NumericIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The stagewise algorithm could not select a word at some stage.
class FitFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace skde
