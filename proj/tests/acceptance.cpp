// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sgpf/analyticity.hpp"
#include "sgpf/case_io.hpp"
#include "sgpf/experiments.hpp"
#include "sgpf/moments.hpp"
#include "sgpf/newton.hpp"
#include "sgpf/nodes1d.hpp"
#include "sgpf/powerflow.hpp"
#include "sgpf/sparse_grid.hpp"

using namespace sgpf;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (secs > limit_s) {
        o.pass = false;
        o.detail += " [over time limit]";
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s - %s (%s) [%.2fs / %.0fs]\n", id, o.pass ? "PASS" : "FAIL", title,
                o.detail.c_str(), secs, limit_s);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Vector vec1(double x) { return Vector::Constant(1, x); }

// ---------------------------------------------------------------------------

Outcome polynomial_exactness() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    int cases = 0;
    for (const auto& rule : {GridRule::smolyak(), GridRule::total_degree(), GridRule::hyperbolic_cross()}) {
        for (int n = 1; n <= 3; ++n) {
            std::vector<double> pts(static_cast<std::size_t>(100 * n));
            for (auto& p : pts) p = u(rng);
            for (int w = 0; w <= 4; ++w) {
                const auto plan = std::make_shared<const SparseGridPlan>(build_plan(rule, w, n));
                auto space = polynomial_space(rule, w, n);
                std::shuffle(space.begin(), space.end(), rng);
                if (space.size() > 20) space.resize(20);
                for (const auto& deg : space) {
                    auto mono = [&deg](std::span<const double> q) {
                        double v = 1.0;
                        for (std::size_t d = 0; d < deg.size(); ++d) v *= std::pow(q[d], deg[d]);
                        return v;
                    };
                    const auto s = build_surrogate(plan, [&](std::span<const double> q) {
                        return std::vector<double>{mono(q)};
                    });
                    const auto vals = evaluate_surrogate_batch(s, pts);
                    for (int t = 0; t < 100; ++t) {
                        const std::span<const double> q(pts.data() + t * n, static_cast<std::size_t>(n));
                        worst = std::max(worst, std::abs(vals[static_cast<std::size_t>(t)] - mono(q)));
                    }
                    ++cases;
                }
            }
        }
    }
    return {worst < 1e-10, std::to_string(cases) + " members, max error " + fmt("%.2e", worst)};
}

Outcome chebyshev_decay() {
    const double zeta = 3.0 + 2.0 * std::sqrt(2.0);
    auto u = [](double y) { return 1.0 / (y - 3.0); };
    // least-squares slope of log|alpha_k| over k = 1..12, above roundoff
    const auto c = chebyshev_coefficients(u, 12);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int kmin = 1;
    const int kmax = 12;
    for (int k = kmin; k <= kmax; ++k) {
        const double y = std::log(std::abs(c.alpha[static_cast<std::size_t>(k)]));
        sx += k;
        sy += y;
        sxx += double(k) * k;
        sxy += k * y;
    }
    const double cnt = kmax - kmin + 1;
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    const double rate = std::exp(-slope);
    const bool rate_ok = std::abs(rate / zeta - 1.0) < 0.05;

    // interpolation at m Clenshaw-Curtis nodes; M is the sup of |u| on the
    // ellipse E_rho, finite only for rho < zeta, so the bound is minimised
    // over rho in (1, zeta)
    auto bound = [&](int m) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 1; j < 4000; ++j) {
            const double rho = 1.0 + (zeta - 1.0) * j / 4000.0;
            const double mr = 1.0 / (3.0 - 0.5 * (rho + 1.0 / rho));
            best = std::min(best, 2.0 * mr / (rho - 1.0) * std::pow(rho, -m) * 1.5);
        }
        return best;
    };
    bool interp_ok = true;
    std::string detail = "rate " + fmt("%.5f", rate) + " vs zeta " + fmt("%.5f", zeta);
    for (int m : {5, 9, 17}) {
        const auto nodes = clenshaw_curtis_nodes(m);
        std::vector<double> vals;
        for (double x : nodes.points) vals.push_back(u(x));
        double err = 0.0;
        for (int t = 0; t <= 4000; ++t) {
            const double x = -1.0 + 2.0 * t / 4000.0;
            err = std::max(err, std::abs(interpolate_1d(nodes, vals, x) - u(x)));
        }
        const double b = bound(m);
        interp_ok = interp_ok && err < b;
        detail += "; m=" + std::to_string(m) + " err " + fmt("%.2e", err) + " < " + fmt("%.2e", b);
    }
    return {rate_ok && interp_ok, detail};
}

NewtonProblem sqrt2_problem() {
    NewtonProblem p;
    p.residual = [](const Vector& x, const Vector&) { return Vector::Constant(1, x(0) * x(0) - 2.0); };
    p.jacobian = [](const Vector& x, const Vector&) { return Matrix::Constant(1, 1, 2.0 * x(0)); };
    return p;
}

Outcome kantorovich_scalar() {
    const auto p = sqrt2_problem();
    const Vector x0 = vec1(1.5);
    const auto exact = certificate_from_constants(1.0 / 3.0, 1.0 / 12.0, 2.0);
    const auto sampled = kantorovich_certificate(p, x0, Vector(), 0.5, 64, 1);
    const double t_ref = 1.5 - std::sqrt(2.0);
    bool ok = std::abs(exact.h - 1.0 / 9.0) < 1e-12 && std::abs(exact.t_star - t_ref) < 1e-12 &&
              std::abs(sampled.h - 1.0 / 9.0) < 1e-12 && std::abs(sampled.t_star - t_ref) < 1e-12 &&
              exact.satisfied && sampled.satisfied;
    const auto trace = solve(p, x0, Vector(), {1e-14, 20});
    double far = 0.0;
    for (const auto& x : trace.iterates) far = std::max(far, std::abs(x(0) - x0(0)));
    ok = ok && trace.converged && far <= exact.t_star * (1.0 + 1e-12);
    return {ok, "h " + fmt("%.15f", sampled.h) + ", t* " + fmt("%.15f", sampled.t_star) +
                    ", max |x_k - x0| " + fmt("%.15f", far)};
}

Outcome power_flow_correctness() {
    const auto net = to_network(bundled_case(BundledCase::NewEngland39));
    const auto problem = power_flow_problem(net, StochasticPerturbation{});
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> dth(-0.3, 0.3);
    std::uniform_real_distribution<double> dv(-0.1, 0.1);
    const auto base = start_state(net, StartKind::FromCase);
    const auto na = static_cast<Eigen::Index>(net.angle_buses().size());
    double fd = 0.0;
    for (int s = 0; s < 10; ++s) {
        Vector x = base;
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += i < na ? dth(rng) : dv(rng);
        fd = std::max(fd, jacobian_fd_error(problem, x, Vector()));
    }
    const auto t0 = Clock::now();
    const auto r = solve_power_flow(net, StartKind::Flat, {1e-10, 10});
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const auto& rn = r.trace.residual_norms;
    double order = 0.0;
    if (rn.size() >= 3) {
        const auto k = rn.size() - 1;
        order = std::log(rn[k] / rn[k - 1]) / std::log(rn[k - 1] / rn[k - 2]);
    }
    const bool ok = fd < 1e-6 && r.trace.converged && rn.back() < 1e-8 && r.trace.iterations <= 10 &&
                    secs < 1.0 && order >= 1.8;
    return {ok, "fd error " + fmt("%.2e", fd) + ", flat start: " + std::to_string(r.trace.iterations) +
                    " iterations, mismatch " + fmt("%.2e", rn.back()) + ", order " + fmt("%.2f", order) +
                    ", " + fmt("%.3f", secs) + " s"};
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] < v[i - 1])) return false;
    }
    return true;
}

std::string series(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.2e", x);
    return s;
}

Outcome load_and_admittance_studies() {
    ExperimentConfig c;
    c.case_spec = "bundled:case39";
    c.qoi = {QoiSpec::Kind::Voltage, 22};
    c.levels = {1, 2, 3, 4};
    c.reference_level = 5;
    c.load_buses = {20, 21};
    c.load_coeff = 0.5;
    c.timing = false;
    const auto load = run_uq_convergence(c);
    std::vector<double> em;
    std::vector<double> ev;
    for (const auto& r : load.rows) {
        em.push_back(r.err_mean);
        ev.push_back(r.err_var);
    }
    const auto& a = load.rows[load.rows.size() - 2];
    const auto& b = load.rows.back();
    const double lk = std::log(double(b.knots) / double(a.knots));
    const double slope_m = std::log(b.err_mean / a.err_mean) / lk;
    const double slope_v = std::log(b.err_var / a.err_var) / lk;
    const bool load_ok = strictly_decreasing(em) && strictly_decreasing(ev) && slope_m <= -2.0 && slope_v <= -2.0;

    ExperimentConfig d = c;
    d.load_buses.clear();
    d.branches = {35, 37};
    d.admittance_coeff = 0.5;
    const auto adm = run_uq_convergence(d);
    std::vector<double> am;
    std::vector<double> av;
    for (const auto& r : adm.rows) {
        am.push_back(r.err_mean);
        av.push_back(r.err_var);
    }
    const bool adm_ok = strictly_decreasing(am) && strictly_decreasing(av);
    return {load_ok && adm_ok, "loads 20,21: err_mean " + series(em) + ", err_var " + series(ev) +
                                   ", slopes " + fmt("%.2f", slope_m) + "/" + fmt("%.2f", slope_v) +
                                   "; branches 35,37: err_mean " + series(am) + ", err_var " + series(av)};
}

Outcome analyticity_smoke() {
    const auto net = to_network(bundled_case(BundledCase::Demo3Bus));
    StochasticPerturbation pert;
    pert.n = 1;
    pert.loads.push_back({3, 0.5, 0.5, {0}});
    const auto ext = power_flow_extension(net, pert);
    const auto nominal = solve_power_flow(net, StartKind::Flat, {1e-13, 30});
    const auto x0 = ComplexState::from_complex(nominal.x.cast<Complex>());
    // state position of V at bus 3, the only PQ bus
    const auto v3 = static_cast<Eigen::Index>(net.angle_buses().size());
    auto v_of = [&](Complex g) {
        const auto t = solve_complexified(ext, x0, CVector::Constant(1, g), {1e-14, 40});
        if (!t.converged) throw std::runtime_error("complexified solve failed");
        return t.solution().to_complex()(v3);
    };
    const Complex g0(0.3, 0.05);
    const auto t = solve_complexified(ext, x0, CVector::Constant(1, g0), {1e-12, 40});
    const double h = 1e-4;
    const Complex dx = (v_of(g0 + h) - v_of(g0 - h)) / (2.0 * h);
    const Complex dy = (v_of(g0 + Complex(0, h)) - v_of(g0 - Complex(0, h))) / (2.0 * h);
    const double cr = std::abs(dy - Complex(0, 1) * dx);
    return {t.converged && cr < 1e-6, "converged in " + std::to_string(t.iterations) + " iterations, V3 = " +
                                          fmt("%.6f", t.solution().real_part(v3)) + fmt("%+.6fi", t.solution().imag_part(v3)) +
                                          ", Cauchy-Riemann residual " + fmt("%.2e", cr)};
}

Outcome bound_dominance() {
    // u(y) = 1/(y - 3): analytic inside the ellipse with sigma_hat < log(3 + 2 sqrt 2)
    const double s_max = std::log(3.0 + 2.0 * std::sqrt(2.0));
    const double s_hat = 0.9 * s_max;
    const double m_tilde = 1.0 / (3.0 - std::cosh(s_hat));
    const auto c = make_bound_constants(s_hat, 1, m_tilde);
    auto u = [](std::span<const double> q) { return std::vector<double>{1.0 / (q[0] - 3.0)}; };
    std::vector<double> pts(1000);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (auto& p : pts) p = ud(rng);
    bool ok = true;
    std::string detail;
    for (int w = 2; w <= 7; ++w) {
        const auto plan = std::make_shared<const SparseGridPlan>(build_plan(GridRule::smolyak(), w, 1));
        const auto s = build_surrogate(plan, u);
        const auto vals = evaluate_surrogate_batch(s, pts);
        double err = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k) err = std::max(err, std::abs(vals[k] - 1.0 / (pts[k] - 3.0)));
        const auto b = convergence_bound(c, w, static_cast<double>(plan->knot_count()));
        ok = ok && b.available && b.regime == BoundRegime::SubExponential && err <= b.bound;
        detail += (detail.empty() ? "" : "; ") + std::string("w=") + std::to_string(w) + " " + fmt("%.1e", err) +
                  " <= " + fmt("%.1e", b.bound);
    }
    return {ok, detail};
}

int parse_error_line(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        (void)parse_matpower(ss.str());
    } catch (const CaseParseError& e) {
        return e.line();
    }
    return -1;
}

Outcome parser() {
    const auto c = bundled_case(BundledCase::NewEngland39);
    const bool counts = c.bus_rows.size() == 39 && c.gen_rows.size() == 10 && c.branch_rows.size() == 46;
    const auto text = serialize(c);
    const bool fixed = serialize(parse_matpower(text)) == text;
    const std::string dir = SGPF_FIXTURE_DIR;
    const int l1 = parse_error_line(dir + "/unterminated.m");
    const int l2 = parse_error_line(dir + "/ragged.m");
    const int l3 = parse_error_line(dir + "/bad_number.m");
    const bool lines = l1 == 4 && l2 == 13 && l3 == 6;
    return {counts && fixed && lines, std::to_string(c.bus_rows.size()) + "/" + std::to_string(c.gen_rows.size()) +
                                          "/" + std::to_string(c.branch_rows.size()) + " rows, fixed point " +
                                          (fixed ? "yes" : "no") + ", error lines " + std::to_string(l1) + "," +
                                          std::to_string(l2) + "," + std::to_string(l3)};
}

Outcome moments_vs_oracle() {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    const auto plan = std::make_shared<const SparseGridPlan>(build_plan(GridRule::smolyak(), 4, 2));
    const std::vector<Density1D> rho(2, Density1D::uniform());
    const auto qp = default_quadrature(rho, plan->max_degree());
    const auto dm = DensityModel::uniform(2);
    double worst = 0.0;
    for (int f = 0; f < 10; ++f) {
        const double a1 = coef(rng), a2 = coef(rng), b1 = coef(rng), b2 = coef(rng), ph = 3.0 * coef(rng);
        const double c0 = coef(rng), c1 = 0.5 * coef(rng);
        auto fn = [=](std::span<const double> q) {
            return c0 + std::exp(0.5 * (a1 * q[0] + a2 * q[1])) + std::sin(b1 * q[0] - b2 * q[1] + ph) +
                   c1 * q[0] * q[1];
        };
        const auto s = build_surrogate(plan, [&](std::span<const double> q) { return std::vector<double>{fn(q)}; });
        const auto m = surrogate_moments(s, dm, qp).at(0);
        const std::size_t n = 1000000;
        const auto mc = monte_carlo_oracle(fn, rho, n, 1000 + static_cast<std::uint64_t>(f));
        // fourth central moment for the standard error of the sample variance
        std::mt19937_64 again(1000 + static_cast<std::uint64_t>(f));
        std::vector<double> q(2);
        double m4 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            q[0] = rho[0].sample(again);
            q[1] = rho[1].sample(again);
            const double d = fn(q) - mc.mean;
            m4 += d * d * d * d;
        }
        m4 /= static_cast<double>(n);
        const double se_var = std::sqrt(std::max(0.0, m4 - mc.variance * mc.variance) / static_cast<double>(n));
        worst = std::max(worst, std::abs(m.mean - mc.mean) / mc.std_error);
        worst = std::max(worst, std::abs(m.variance.value - mc.variance) / se_var);
    }
    return {worst < 4.0, "10 functions, worst deviation " + fmt("%.2f", worst) + " standard errors"};
}

}  // namespace

int main() {
    report(1, "polynomial exactness", 10, polynomial_exactness);
    report(2, "Chebyshev decay", 1, chebyshev_decay);
    report(3, "Kantorovich scalar", 1, kantorovich_scalar);
    report(4, "power-flow correctness", 60, power_flow_correctness);
    report(5, "case39 load and admittance studies", 300, load_and_admittance_studies);
    report(6, "analyticity smoke", 5, analyticity_smoke);
    report(7, "bound dominance", 10, bound_dominance);
    report(8, "parser", 1, parser);
    report(9, "moments vs Monte Carlo", 30, moments_vs_oracle);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
