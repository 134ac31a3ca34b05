#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two grid functions (or a function and an operator) live on different grids.
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A frequency support does not fit inside the band of the sampling grid.
class NyquistViolation : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The iterative eigensolver stopped at its iteration cap.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, std::vector<double> residuals)
        : Error(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// The eigenvalue window holds more eigenvalues than the caller allowed.
class TooManyEigenvalues : public Error {
public:
    TooManyEigenvalues(const std::string& what, double estimated_count)
        : Error(what), estimated_count_(estimated_count) {}
    double estimated_count() const { return estimated_count_; }

private:
    double estimated_count_;
};

}  // namespace qlab
