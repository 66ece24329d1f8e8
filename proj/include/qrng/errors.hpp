#pragma once

#include <stdexcept>
#include <string>

namespace qrng {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range or inconsistent arguments.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (files, outcome streams).
class DataError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to reach its requested tolerance.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}

  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

// The constraint table cannot be produced by any admissible strategy.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A dual certificate failed independent verification.
class CertificateError : public Error {
 public:
  CertificateError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Frame synchronization could not locate a reference pattern.
class SyncError : public Error {
 public:
  SyncError(const std::string& what, double best_score)
      : Error(what), best_score_(best_score) {}

  double best_score() const noexcept { return best_score_; }

 private:
  double best_score_;
};

// A finite bit source ran dry.
class UnderflowError : public Error {
 public:
  using Error::Error;
};

}  // namespace qrng
