#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "sgpf/linalg.hpp"

namespace sgpf {

/// f(x; p) = 0 with its Jacobian with respect to x.
struct NewtonProblem {
    std::function<Vector(const Vector& x, const Vector& p)> residual;
    std::function<Matrix(const Vector& x, const Vector& p)> jacobian;
};

/// Holomorphic extension of a NewtonProblem to complex states and parameters.
/// f_R, f_I, J_R, J_I are the real and imaginary parts of these.
struct ComplexExtension {
    std::function<CVector(const CVector& z, const CVector& g)> residual;
    std::function<CMatrix(const CVector& z, const CVector& g)> jacobian;
};

/// OutOfDomain: the residual rejected an iterate (DomainError), e.g. a
/// voltage magnitude went nonpositive.
enum class NewtonStatus { Converged, MaxIterations, Singular, NonFinite, OutOfDomain };

[[nodiscard]] const char* to_string(NewtonStatus s) noexcept;

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
};

struct NewtonTrace {
    std::vector<Vector> iterates;
    /// ||f(x^v)||_inf, one entry per iterate.
    std::vector<double> residual_norms;
    bool converged = false;
    int iterations = 0;
    NewtonStatus status = NewtonStatus::MaxIterations;
    /// Iteration at which the Jacobian was found singular (status Singular).
    int singular_iteration = -1;
    double min_pivot = 0.0;

    [[nodiscard]] const Vector& solution() const { return iterates.back(); }
};

/// x^{v+1} = x^v - J(x^v)^{-1} f(x^v) until ||f||_inf <= tol.
[[nodiscard]] NewtonTrace solve(const NewtonProblem& problem, const Vector& x0, const Vector& params,
                                const NewtonOptions& opts = {});

struct KantorovichCertificate {
    double kappa = 0.0;
    double delta = 0.0;
    /// Sampled estimate of the Lipschitz constant of J on the probe ball.
    double lambda = 0.0;
    double h = 0.0;
    double t_star = 0.0;
    bool satisfied = false;
    double ball_radius = 0.0;
    int probe_count = 0;
    std::uint64_t seed = 0;
};

/// h, t* and satisfied from given kappa, delta, lambda.
[[nodiscard]] KantorovichCertificate certificate_from_constants(double kappa, double delta,
                                                                double lambda);

/// kappa = ||J(x0)^{-1}||_2, delta = ||J(x0)^{-1} f(x0)||_2 and lambda sampled
/// over `probe_count` random pairs in the ball of `ball_radius` around x0.
/// Throws DomainError if J(x0) is singular.
[[nodiscard]] KantorovichCertificate kantorovich_certificate(const NewtonProblem& problem,
                                                             const Vector& x0,
                                                             const Vector& params,
                                                             double ball_radius, int probe_count,
                                                             std::uint64_t seed);

struct ComplexState {
    Vector real_part;
    Vector imag_part;

    [[nodiscard]] CVector to_complex() const;
    static ComplexState from_complex(const CVector& z);
};

struct ComplexNewtonTrace {
    std::vector<ComplexState> iterates;
    std::vector<double> residual_norms;
    /// Smallest singular value of the block Jacobian at each step taken.
    std::vector<double> sigma_min;
    bool converged = false;
    int iterations = 0;
    NewtonStatus status = NewtonStatus::MaxIterations;
    int singular_iteration = -1;

    [[nodiscard]] const ComplexState& solution() const { return iterates.back(); }
};

/// Block matrix [[J_R, -J_I], [J_I, J_R]].
[[nodiscard]] Matrix block_jacobian(const CMatrix& j);

/// Newton on the 2m real system [[J_R, -J_I],[J_I, J_R]] d = -[f_R; f_I].
/// ||f||_inf is taken over the stacked real vector.
[[nodiscard]] ComplexNewtonTrace solve_complexified(const ComplexExtension& ext,
                                                    const ComplexState& x0, const CVector& g,
                                                    const NewtonOptions& opts = {});

/// Largest relative deviation between the analytic Jacobian and central
/// differences of the residual (step h scaled by max(1, |x_j|)).
[[nodiscard]] double jacobian_fd_error(const NewtonProblem& problem, const Vector& x,
                                       const Vector& params, double h = 1e-6);

}  // namespace sgpf
