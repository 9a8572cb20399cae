#include "sgpf/newton.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace sgpf {

const char* to_string(NewtonStatus s) noexcept {
    switch (s) {
        case NewtonStatus::Converged: return "converged";
        case NewtonStatus::MaxIterations: return "max-iterations";
        case NewtonStatus::Singular: return "singular-jacobian";
        case NewtonStatus::NonFinite: return "non-finite";
        case NewtonStatus::OutOfDomain: return "out-of-domain";
    }
    return "unknown";
}

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void check_options(const NewtonOptions& opts) {
    if (!(opts.tol > 0.0)) throw ContractViolation("newton: tol must be positive");
    if (opts.max_iter < 0) throw ContractViolation("newton: max_iter must be nonnegative");
}

}  // namespace

NewtonTrace solve(const NewtonProblem& problem, const Vector& x0, const Vector& params,
                  const NewtonOptions& opts) {
    check_options(opts);
    if (!x0.allFinite()) throw ContractViolation("newton: x0 must be finite");
    NewtonTrace trace;
    Vector x = x0;
    for (int v = 0;; ++v) {
        Vector f;
        try {
            f = problem.residual(x, params);
        } catch (const DomainError&) {
            trace.iterates.push_back(x);
            trace.residual_norms.push_back(std::numeric_limits<double>::infinity());
            trace.iterations = v;
            trace.status = NewtonStatus::OutOfDomain;
            return trace;
        }
        const double r = inf_norm(f);
        trace.iterates.push_back(x);
        trace.residual_norms.push_back(r);
        trace.iterations = v;
        if (!std::isfinite(r)) {
            trace.status = NewtonStatus::NonFinite;
            return trace;
        }
        if (r <= opts.tol) {
            trace.converged = true;
            trace.status = NewtonStatus::Converged;
            return trace;
        }
        if (v >= opts.max_iter) {
            trace.status = NewtonStatus::MaxIterations;
            return trace;
        }
        const auto lu = lu_solve(problem.jacobian(x, params), f);
        trace.min_pivot = lu.min_pivot;
        if (lu.singular) {
            trace.status = NewtonStatus::Singular;
            trace.singular_iteration = v;
            return trace;
        }
        x -= lu.x;
    }
}

KantorovichCertificate certificate_from_constants(double kappa, double delta, double lambda) {
    if (!(kappa >= 0.0) || !(delta >= 0.0) || !(lambda >= 0.0)) {
        throw ContractViolation("certificate: constants must be nonnegative");
    }
    KantorovichCertificate c;
    c.kappa = kappa;
    c.delta = delta;
    c.lambda = lambda;
    c.h = 2.0 * kappa * lambda * delta;
    c.satisfied = c.h <= 1.0;
    // (2/h)(1 - sqrt(1-h)) delta == 2 delta / (1 + sqrt(1-h)), finite at h = 0
    c.t_star = c.satisfied ? 2.0 * delta / (1.0 + std::sqrt(1.0 - c.h))
                           : std::numeric_limits<double>::infinity();
    return c;
}

KantorovichCertificate kantorovich_certificate(const NewtonProblem& problem, const Vector& x0,
                                               const Vector& params, double ball_radius,
                                               int probe_count, std::uint64_t seed) {
    if (!(ball_radius > 0.0)) throw ContractViolation("certificate: ball_radius must be positive");
    if (probe_count < 1) throw ContractViolation("certificate: probe_count must be positive");
    const Matrix j0 = problem.jacobian(x0, params);
    const Vector f0 = problem.residual(x0, params);
    const auto lu = lu_solve(j0, f0);
    if (lu.singular) throw DomainError("certificate: J(x0) is singular");
    const double kappa = 1.0 / min_singular_value(j0);
    const double delta = lu.x.norm();

    const auto m = x0.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    auto draw = [&]() {
        Vector d(m);
        for (Eigen::Index i = 0; i < m; ++i) d(i) = normal(rng);
        const double n = d.norm();
        const double r = ball_radius * std::pow(unit(rng), 1.0 / static_cast<double>(m));
        return Vector(x0 + (n > 0.0 ? d * (r / n) : d));
    };
    double lambda = 0.0;
    for (int k = 0; k < probe_count; ++k) {
        const Vector x = draw();
        // alternate between pairs anchored at x0 and fully random pairs
        const Vector y = (k % 2 == 0) ? Vector(x0) : draw();
        const double dist = (x - y).norm();
        if (dist == 0.0) continue;
        const double num = spectral_norm(problem.jacobian(x, params) - problem.jacobian(y, params));
        lambda = std::max(lambda, num / dist);
    }
    auto c = certificate_from_constants(kappa, delta, lambda);
    c.ball_radius = ball_radius;
    c.probe_count = probe_count;
    c.seed = seed;
    return c;
}

CVector ComplexState::to_complex() const {
    if (real_part.size() != imag_part.size()) {
        throw ContractViolation("ComplexState: real and imaginary sizes differ");
    }
    CVector z(real_part.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = Complex(real_part(i), imag_part(i));
    return z;
}

ComplexState ComplexState::from_complex(const CVector& z) {
    return {z.real(), z.imag()};
}

Matrix block_jacobian(const CMatrix& j) {
    const auto m = j.rows();
    Matrix b(2 * m, 2 * m);
    b.topLeftCorner(m, m) = j.real();
    b.topRightCorner(m, m) = -j.imag();
    b.bottomLeftCorner(m, m) = j.imag();
    b.bottomRightCorner(m, m) = j.real();
    return b;
}

ComplexNewtonTrace solve_complexified(const ComplexExtension& ext, const ComplexState& x0,
                                      const CVector& g, const NewtonOptions& opts) {
    check_options(opts);
    CVector z = x0.to_complex();
    if (!z.allFinite()) throw ContractViolation("newton: x0 must be finite");
    const auto m = z.size();
    ComplexNewtonTrace trace;
    for (int v = 0;; ++v) {
        CVector f;
        try {
            f = ext.residual(z, g);
        } catch (const DomainError&) {
            trace.iterates.push_back(ComplexState::from_complex(z));
            trace.residual_norms.push_back(std::numeric_limits<double>::infinity());
            trace.iterations = v;
            trace.status = NewtonStatus::OutOfDomain;
            return trace;
        }
        Vector rhs(2 * m);
        rhs.head(m) = f.real();
        rhs.tail(m) = f.imag();
        const double r = inf_norm(rhs);
        trace.iterates.push_back(ComplexState::from_complex(z));
        trace.residual_norms.push_back(r);
        trace.iterations = v;
        if (!std::isfinite(r)) {
            trace.status = NewtonStatus::NonFinite;
            return trace;
        }
        if (r <= opts.tol) {
            trace.converged = true;
            trace.status = NewtonStatus::Converged;
            return trace;
        }
        if (v >= opts.max_iter) {
            trace.status = NewtonStatus::MaxIterations;
            return trace;
        }
        const Matrix b = block_jacobian(ext.jacobian(z, g));
        trace.sigma_min.push_back(min_singular_value(b));
        const auto lu = lu_solve(b, rhs);
        if (lu.singular) {
            trace.status = NewtonStatus::Singular;
            trace.singular_iteration = v;
            return trace;
        }
        for (Eigen::Index i = 0; i < m; ++i) z(i) -= Complex(lu.x(i), lu.x(m + i));
    }
}

double jacobian_fd_error(const NewtonProblem& problem, const Vector& x, const Vector& params,
                         double h) {
    const Matrix j = problem.jacobian(x, params);
    const double scale = std::max(1.0, j.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        const double step = h * std::max(1.0, std::abs(x(c)));
        Vector xp = x;
        Vector xm = x;
        xp(c) += step;
        xm(c) -= step;
        const Vector col = (problem.residual(xp, params) - problem.residual(xm, params)) / (2.0 * step);
        worst = std::max(worst, (col - j.col(c)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

}  // namespace sgpf
