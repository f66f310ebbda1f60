#pragma once

#include <stdexcept>
#include <string>

namespace cflab {

/// Base class for every runtime failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An explicit time step produced a negative or non-finite count.
class SolverAbort : public Error {
 public:
  SolverAbort(const std::string& what, double t, std::size_t bin, double value)
      : Error(what), t_(t), bin_(bin), value_(value) {}
  double time() const { return t_; }
  std::size_t bin() const { return bin_; }
  double value() const { return value_; }

 private:
  double t_;
  std::size_t bin_;
  double value_;
};

/// The initial profile does not fit on the requested size grid.
class GridTooSmall : public Error {
 public:
  using Error::Error;
};

/// A stochastic system with zero total event rate.
class AbsorbingState : public Error {
 public:
  using Error::Error;
};

/// Query point outside the x-range covered by surviving characteristics.
class CoverageGap : public Error {
 public:
  CoverageGap(const std::string& what, double x, double t, double lo, double hi)
      : Error(what), x_(x), t_(t), lo_(lo), hi_(hi) {}
  double x() const { return x_; }
  double time() const { return t_; }
  double covered_lo() const { return lo_; }
  double covered_hi() const { return hi_; }

 private:
  double x_, t_, lo_, hi_;
};

/// Two characteristics met or swapped order.
class CharacteristicCrossing : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArtifactMissing : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace cflab
