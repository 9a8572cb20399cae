#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sgpf {

using Complex = std::complex<double>;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

template <typename T>
using VectorT = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for values outside the domain where a model is defined
/// (e.g. nonpositive bus voltage magnitudes).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Largest singular value.
double spectral_norm(const Matrix& a);

/// Smallest singular value.
double min_singular_value(const Matrix& a);

struct LuSolveResult {
    bool singular = false;
    double min_pivot = 0.0;
    double scale = 0.0;
    Vector x;
};

/// Dense LU with partial pivoting. Flags the system as singular when the
/// smallest pivot magnitude is below 1e-14 times the largest entry of `a`.
LuSolveResult lu_solve(const Matrix& a, const Vector& b);

inline constexpr double kPivotTolerance = 1e-14;

}  // namespace sgpf
