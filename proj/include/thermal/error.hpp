#pragma once

#include <stdexcept>
#include <string>

namespace thermal {

// Base class for every failure raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input: bad dimensions, malformed model files, wrong method/model
// combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Base for numerical failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Singular (I + JB) in the Cayley map.
class CausticError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularHessianError : public NumericalError {
 public:
  SingularHessianError(const std::string& what, double det)
      : NumericalError(what), det_(det) {}
  double det() const { return det_; }

 private:
  double det_;
};

// Local Hessian is hyperbolic where an elliptic form is required.
class HyperbolicError : public NumericalError {
 public:
  HyperbolicError(const std::string& what, double det)
      : NumericalError(what), det_(det) {}
  double det() const { return det_; }

 private:
  double det_;
};

// Short-time prefactor denominator non-positive.
class ValidityError : public NumericalError {
 public:
  ValidityError(const std::string& what, double parameter)
      : NumericalError(what), parameter_(parameter) {}
  // ħβΩ_x/2 of the offending point (imaginary part folded into the sign).
  double parameter() const { return parameter_; }

 private:
  double parameter_;
};

class StiffnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  QuadratureError(const std::string& what, double coarse, double fine)
      : NumericalError(what), coarse_(coarse), fine_(fine) {}
  double coarse() const { return coarse_; }
  double fine() const { return fine_; }

 private:
  double coarse_;
  double fine_;
};

class BasisTooSmallError : public NumericalError {
 public:
  BasisTooSmallError(const std::string& what, int suggested)
      : NumericalError(what), suggested_(suggested) {}
  int suggested_size() const { return suggested_; }

 private:
  int suggested_;
};

class TruncationError : public NumericalError {
 public:
  TruncationError(const std::string& what, double beta_e_max)
      : NumericalError(what), beta_e_max_(beta_e_max) {}
  double beta_e_max() const { return beta_e_max_; }

 private:
  double beta_e_max_;
};

class ResolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace thermal
