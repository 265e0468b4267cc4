#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ssmkit {

using cplx = std::complex<double>;

using VecR = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using MatC = Eigen::MatrixXcd;
using SpMatR = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cplx>;

inline constexpr cplx I_unit{0.0, 1.0};

// Error hierarchy. The CLI maps each class onto a process exit code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input, inconsistent dimensions, bad parameters (exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Factorization failure, eigensolver non-convergence, integrator failure (exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A structurally valid system the algorithms do not handle (defective eigenvalues,
/// non-2-D subspaces for polar reduction, ...). Reported like a numerical failure.
class UnsupportedError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Outer resonance encountered while a normal-form solve was requested (exit code 4).
class OuterResonanceError : public Error {
public:
    using Error::Error;
};

/// File-system or parse problems; these are validation failures from the user's side.
class IoError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace ssmkit
