#include "sgpf/analyticity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sgpf {

double EllipseRegion::min_sigma_hat() const {
    if (sigma_hat.empty()) throw ContractViolation("EllipseRegion: empty");
    return *std::min_element(sigma_hat.begin(), sigma_hat.end());
}

double joukowski_rho(Complex z) {
    const Complex r = std::sqrt(z * z - 1.0);
    return std::max(std::abs(z + r), std::abs(z - r));
}

bool ellipse_contains(const EllipseRegion& region, std::span<const Complex> g) {
    if (g.size() != region.sigma_hat.size()) {
        throw ContractViolation("ellipse_contains: dimension mismatch");
    }
    for (std::size_t n = 0; n < g.size(); ++n) {
        // small slack so that boundary points count as inside
        if (joukowski_rho(g[n]) > std::exp(region.sigma_hat[n]) * (1.0 + 1e-12)) return false;
    }
    return true;
}

BoundConstants make_bound_constants(double sigma_hat, int n, double m_tilde) {
    if (!(sigma_hat > 0.0) || n < 1 || !(m_tilde >= 0.0)) {
        throw ContractViolation("bound constants: need sigma_hat > 0, N >= 1, M >= 0");
    }
    constexpr double ln2 = std::numbers::ln2;
    constexpr double e = std::numbers::e;
    constexpr double pi = std::numbers::pi;
    BoundConstants c;
    c.sigma = sigma_hat / 2.0;
    c.n = n;
    c.m_tilde = m_tilde;
    const double s = c.sigma;
    const double log2n = std::log(2.0 * n);
    c.mu1 = s / (1.0 + log2n);
    c.mu2 = ln2 / (n * (1.0 + log2n));
    c.c2_tilde = 1.0 + std::sqrt(pi / (2.0 * s)) / ln2;
    c.delta_star = (e * ln2 - 1.0) / c.c2_tilde;
    const double braces =
        1.0 / (s * ln2 * ln2) + 1.0 / (ln2 * std::sqrt(2.0 * s)) + 2.0 * c.c2_tilde;
    c.a_coef = std::exp(c.delta_star * s * braces);
    const double c_sigma = 2.0 / (std::exp(s) - 1.0);
    c.c1 = 4.0 * m_tilde * c_sigma * c.a_coef / (e * c.delta_star * s);
    c.mu3 = s * c.delta_star * c.c2_tilde / (1.0 + 2.0 * log2n);
    c.q_coef = c.c1 / std::exp(s * c.delta_star * c.c2_tilde) *
               std::pow(std::max(1.0, c.c1), n) / std::abs(1.0 - c.c1);
    return c;
}

const char* to_string(BoundRegime r) noexcept {
    return r == BoundRegime::SubExponential ? "sub-exponential" : "algebraic";
}

ConvergenceBound convergence_bound(const BoundConstants& c, int w, double eta) {
    if (!(eta >= 1.0)) throw ContractViolation("convergence_bound: eta must be >= 1");
    if (c.n < 1) throw ContractViolation("convergence_bound: invalid constants");
    ConvergenceBound out;
    const double n = c.n;
    out.regime = w > n / std::numbers::ln2 ? BoundRegime::SubExponential : BoundRegime::Algebraic;
    if (std::abs(1.0 - c.c1) < 1e-9) {
        out.available = false;
        out.bound = std::numeric_limits<double>::infinity();
        return out;
    }
    if (out.regime == BoundRegime::SubExponential) {
        out.bound = c.q_coef * std::pow(eta, c.mu3) *
                    std::exp(-(n * c.sigma / std::pow(2.0, 1.0 / n)) * std::pow(eta, c.mu2));
    } else {
        out.bound = c.c1 / std::abs(1.0 - c.c1) * std::pow(std::max(1.0, c.c1), n) *
                    std::pow(eta, -c.mu1);
    }
    return out;
}

double mtilde_bound(double t_star_e, const Vector& x0) {
    if (!(t_star_e >= 0.0)) throw ContractViolation("mtilde_bound: t_star_e must be nonnegative");
    return t_star_e + x0.norm();
}

namespace {

std::vector<double> t_grid(const RemainderSampling& s) {
    std::vector<double> t;
    for (int j = 0; j < s.stratified_t; ++j) t.push_back((j + 0.5) / s.stratified_t);
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int j = 0; j < s.random_t; ++j) t.push_back(u(rng));
    return t;
}

CVector to_cvector(const Vector& x) { return x.cast<Complex>(); }

}  // namespace

PerturbationBounds estimate_perturbation_norms(const ComplexExtension& ext, const Vector& x0,
                                               const Vector& q, const CVector& v,
                                               const RemainderSampling& sampling) {
    if (q.size() != v.size()) throw ContractViolation("perturbation norms: q and v sizes differ");
    const CVector z0 = to_cvector(x0);
    const CVector gq = q.cast<Complex>();
    if (lu_solve(ext.jacobian(z0, gq).real(), Vector::Zero(x0.size())).singular) {
        throw DomainError("perturbation norms: J(x0, q) is singular");
    }
    const auto m = x0.size();
    const auto np = q.size();
    PerturbationBounds out;
    if (v.cwiseAbs().maxCoeff() == 0.0) return out;

    const CVector g = gq + v;
    const CMatrix jg = ext.jacobian(z0, g);
    const CVector fg = ext.residual(z0, g);

    // sup over t of |d J_R / d y_beta| and |d f_R / d y_beta|, where y runs
    // over Re g_n and Im g_n. For holomorphic maps d/dRe g = D and d/dIm g = iD.
    Matrix qm = Matrix::Zero(m, m);
    Vector pv = Vector::Zero(m);
    for (Eigen::Index n = 0; n < np; ++n) {
        const double vr = std::abs(v(n).real());
        const double vi = std::abs(v(n).imag());
        if (vr == 0.0 && vi == 0.0) continue;
        Matrix jr_sup = Matrix::Zero(m, m);
        Matrix ji_sup = Matrix::Zero(m, m);
        Vector fr_sup = Vector::Zero(m);
        Vector fi_sup = Vector::Zero(m);
        for (double t : t_grid(sampling)) {
            const CVector gt = gq + t * v;
            const double h = 1e-6 * std::max(1.0, std::abs(gt(n)));
            CVector gp = gt;
            CVector gm = gt;
            gp(n) += h;
            gm(n) -= h;
            const CMatrix dj = (ext.jacobian(z0, gp) - ext.jacobian(z0, gm)) / (2.0 * h);
            const CVector df = (ext.residual(z0, gp) - ext.residual(z0, gm)) / (2.0 * h);
            jr_sup = jr_sup.cwiseMax(dj.real().cwiseAbs());
            ji_sup = ji_sup.cwiseMax(dj.imag().cwiseAbs());
            fr_sup = fr_sup.cwiseMax(df.real().cwiseAbs());
            fi_sup = fi_sup.cwiseMax(df.imag().cwiseAbs());
        }
        // d/dRe J_R = Re D, d/dIm J_R = -Im D
        qm += jr_sup * vr + ji_sup * vi;
        pv += fr_sup * vr + fi_sup * vi;
    }
    Matrix e(2 * m, 2 * m);
    e.topLeftCorner(m, m) = qm;
    e.topRightCorner(m, m) = -jg.imag();
    e.bottomLeftCorner(m, m) = jg.imag();
    e.bottomRightCorner(m, m) = qm;
    Vector gvec(2 * m);
    gvec.head(m) = pv;
    gvec.tail(m) = fg.imag();
    out.e_norm = spectral_norm(e);
    out.g_norm = gvec.norm();
    return out;
}

void check_feasibility(PerturbationBounds& b, double kappa, double delta, double kappa_e,
                       double delta_e) {
    b.kappa_e = kappa_e;
    b.delta_e = delta_e;
    b.e_feasible = b.e_norm < (1.0 - kappa / kappa_e) / kappa;
    b.g_feasible = b.g_norm < delta_e / kappa_e - delta / kappa;
}

RegionSearchResult admissible_region_search(const ComplexExtension& ext, const Vector& x0, int n,
                                            double kappa, double delta, double kappa_e,
                                            double delta_e, const RegionSearchOptions& opts) {
    if (n < 1) throw ContractViolation("region search: n must be positive");
    if (!(kappa > 0.0) || !(kappa_e > kappa)) {
        throw ContractViolation("region search: need kappa_e > kappa > 0");
    }
    if (!(delta >= 0.0) || !(delta_e / kappa_e > delta / kappa)) {
        throw ContractViolation("region search: need delta_e/kappa_e > delta/kappa");
    }
    if (!(opts.sigma_cap > 0.0) || !(opts.rel_tol > 0.0)) {
        throw ContractViolation("region search: cap and tolerance must be positive");
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    RegionSearchResult out;
    out.region.sigma_hat.assign(static_cast<std::size_t>(n), 0.0);
    for (int d = 0; d < n; ++d) {
        std::vector<double> thetas = {0.0, std::numbers::pi / 2.0};
        for (int k = 0; k < opts.random_angles; ++k) thetas.push_back(angle(rng));
        auto feasible = [&](double s) {
            for (double th : thetas) {
                const Complex gd(std::cosh(s) * std::cos(th), std::sinh(s) * std::sin(th));
                Vector q = Vector::Zero(n);
                CVector v = CVector::Zero(n);
                q(d) = std::clamp(gd.real(), -1.0, 1.0);
                v(d) = gd - q(d);
                auto b = estimate_perturbation_norms(ext, x0, q, v, opts.sampling);
                check_feasibility(b, kappa, delta, kappa_e, delta_e);
                ++out.probes;
                if (!b.e_feasible || !b.g_feasible) return false;
            }
            return true;
        };
        double lo = 0.0;
        double hi = opts.sigma_cap;
        if (feasible(hi)) {
            lo = hi;
        } else {
            while (hi - lo > opts.rel_tol * hi && hi > 1e-12) {
                const double mid = 0.5 * (lo + hi);
                if (feasible(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        out.region.sigma_hat[static_cast<std::size_t>(d)] = lo;
    }
    return out;
}

GammaConstants gamma_constants(const NewtonProblem& problem, const Vector& x0, int n, int per_dim) {
    if (n < 0 || per_dim < 1) throw ContractViolation("gamma_constants: bad sizes");
    GammaConstants out;
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    const auto coord = [per_dim](int i) {
        return per_dim == 1 ? 0.0 : -1.0 + 2.0 * i / (per_dim - 1);
    };
    for (;;) {
        Vector q(n);
        for (int d = 0; d < n; ++d) q(d) = coord(idx[static_cast<std::size_t>(d)]);
        const Matrix j = problem.jacobian(x0, q);
        const auto lu = lu_solve(j, problem.residual(x0, q));
        if (lu.singular) throw DomainError("gamma_constants: J(x0, q) is singular");
        out.kappa = std::max(out.kappa, 1.0 / min_singular_value(j));
        out.delta = std::max(out.delta, lu.x.norm());
        int d = 0;
        for (; d < n; ++d) {
            if (++idx[static_cast<std::size_t>(d)] < per_dim) break;
            idx[static_cast<std::size_t>(d)] = 0;
        }
        if (d == n) break;
    }
    return out;
}

}  // namespace sgpf
