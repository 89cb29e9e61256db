#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abflab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A potential, reaction coordinate or force returned a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// |grad xi| fell below the configured floor.
class DegenerateGradientError : public Error {
 public:
  using Error::Error;
};

/// The model does not satisfy a structural premise of the requested computation.
class ModelAssumptionError : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double z) : Error(what), z_(z) {}
  double z() const { return z_; }

 private:
  double z_;
};

class EmptySliceError : public Error {
 public:
  EmptySliceError(const std::string& what, double z) : Error(what), z_(z) {}
  double z() const { return z_; }

 private:
  double z_;
};

class CflError : public Error {
 public:
  CflError(const std::string& what, double admissible_dt) : Error(what), admissible_dt_(admissible_dt) {}
  double admissible_dt() const { return admissible_dt_; }

 private:
  double admissible_dt_;
};

class NegativeDensityError : public Error {
 public:
  using Error::Error;
};

/// A particle left the finite range, or a force became non-finite during a run.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t step, std::size_t particle)
      : Error(what), step_(step), particle_(particle) {}
  std::size_t step() const { return step_; }
  std::size_t particle() const { return particle_; }

 private:
  std::size_t step_;
  std::size_t particle_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace abflab
