#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hrtmdg {

using Real = double;
using Complex = std::complex<double>;
using Index = std::int64_t;

using Point = Eigen::Vector2d;
using CVec2 = Eigen::Vector2cd;

using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;

using ScalarField = std::function<Complex(const Point&)>;
using VectorField = std::function<CVec2(const Point&)>;

inline constexpr Complex kI{0.0, 1.0};

/// Base of every error raised by the library. Messages can be prefixed with
/// the pipeline stage that raised them while keeping the dynamic type.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what), message_(what) {}

  const char* what() const noexcept override { return message_.c_str(); }

  void add_context(const std::string& context) { message_ = context + ": " + message_; }

 private:
  std::string message_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Element matrix M = A - B E^{-1} B^t is numerically singular for this kappa.
class LocalResonanceError : public Error {
 public:
  LocalResonanceError(Index cell, Real kappa, Real rcond)
      : Error("local resonance on cell " + std::to_string(cell) + " at kappa=" +
              std::to_string(kappa) + " (rcond=" + std::to_string(rcond) + ")"),
        cell_(cell),
        kappa_(kappa) {}

  Index cell() const { return cell_; }
  Real kappa() const { return kappa_; }

 private:
  Index cell_;
  Real kappa_;
};

/// The condensed multiplier system is singular for this kappa.
class GlobalResonanceError : public Error {
 public:
  GlobalResonanceError(Real kappa, const std::string& detail)
      : Error("global resonance at kappa=" + std::to_string(kappa) + ": " + detail), kappa_(kappa) {}

  Real kappa() const { return kappa_; }

 private:
  Real kappa_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(int iterations, Real residual)
      : Error("iterative solver did not converge after " + std::to_string(iterations) +
              " iterations (relative residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const { return iterations_; }
  Real residual() const { return residual_; }

 private:
  int iterations_;
  Real residual_;
};

}  // namespace hrtmdg
