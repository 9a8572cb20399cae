#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sgpf/linalg.hpp"
#include "sgpf/newton.hpp"

namespace sgpf {

/// Polyellipse with foci +-1 in every coordinate; semi-axes cosh(sigma_hat_n)
/// and sinh(sigma_hat_n).
struct EllipseRegion {
    std::vector<double> sigma_hat;

    [[nodiscard]] double min_sigma_hat() const;
};

/// |z + sqrt(z^2 - 1)| taking the root with modulus >= 1. The ellipse of
/// parameter s is the level set {rho = e^s}.
[[nodiscard]] double joukowski_rho(Complex z);

[[nodiscard]] bool ellipse_contains(const EllipseRegion& region, std::span<const Complex> g);

struct BoundConstants {
    double sigma = 0.0;  ///< sigma_hat / 2
    int n = 0;
    double m_tilde = 0.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double mu3 = 0.0;
    double delta_star = 0.0;
    double c1 = 0.0;
    double c2_tilde = 0.0;
    double a_coef = 0.0;
    double q_coef = 0.0;
};

[[nodiscard]] BoundConstants make_bound_constants(double sigma_hat, int n, double m_tilde);

enum class BoundRegime { SubExponential, Algebraic };

[[nodiscard]] const char* to_string(BoundRegime r) noexcept;

struct ConvergenceBound {
    BoundRegime regime = BoundRegime::Algebraic;
    double bound = 0.0;
    /// False when C1 is within 1e-9 of one; bound is then +inf.
    bool available = true;
};

/// Sub-exponential bound when w > N / log 2, algebraic bound otherwise.
/// eta is the number of knots.
[[nodiscard]] ConvergenceBound convergence_bound(const BoundConstants& c, int w, double eta);

/// t_e* + ||x0||_2.
[[nodiscard]] double mtilde_bound(double t_star_e, const Vector& x0);

struct PerturbationBounds {
    double e_norm = 0.0;
    double g_norm = 0.0;
    double kappa_e = 0.0;
    double delta_e = 0.0;
    bool e_feasible = false;
    bool g_feasible = false;
};

struct RemainderSampling {
    /// Random t probes added to the fixed stratified grid.
    int random_t = 32;
    int stratified_t = 33;
    std::uint64_t seed = 0;
};

/// ||E|| and ||G|| at g = q + v for the complexified problem at state x0.
/// E = [[Q, -J_I], [J_I, Q]], G = [P; f_I], with the remainder terms Q and P
/// bounded by sampling |d/dy J_R| and |d/dy f_R| along q + t v over the real
/// and imaginary parameter directions y.
[[nodiscard]] PerturbationBounds estimate_perturbation_norms(const ComplexExtension& ext,
                                                             const Vector& x0, const Vector& q,
                                                             const CVector& v,
                                                             const RemainderSampling& sampling = {});

/// Recomputes the feasibility flags of b for the given constants.
void check_feasibility(PerturbationBounds& b, double kappa, double delta, double kappa_e,
                       double delta_e);

struct RegionSearchOptions {
    double sigma_cap = 4.0;
    double rel_tol = 1e-3;
    int random_angles = 4;
    std::uint64_t seed = 0;
    RemainderSampling sampling;
};

struct RegionSearchResult {
    EllipseRegion region;
    /// Probe evaluations performed, for reporting.
    int probes = 0;
};

/// Bisection per dimension for the largest sigma_hat at which both
/// ||E|| < (1 - kappa/kappa_e)/kappa and ||G|| < delta_e/kappa_e - delta/kappa
/// hold at the probe points of the ellipse boundary (two axis points and
/// `random_angles` seeded angles; other coordinates at zero). A probe g is
/// split into q = clamp(Re g, -1, 1) and v = g - q.
[[nodiscard]] RegionSearchResult admissible_region_search(const ComplexExtension& ext,
                                                          const Vector& x0, int n, double kappa,
                                                          double delta, double kappa_e,
                                                          double delta_e,
                                                          const RegionSearchOptions& opts = {});

/// Largest ||J(x0,q)^{-1}|| and ||J(x0,q)^{-1} f(x0,q)|| over q in the tensor
/// grid of `per_dim` points per dimension of [-1,1]^n.
struct GammaConstants {
    double kappa = 0.0;
    double delta = 0.0;
};
[[nodiscard]] GammaConstants gamma_constants(const NewtonProblem& problem, const Vector& x0, int n,
                                             int per_dim = 5);

}  // namespace sgpf
