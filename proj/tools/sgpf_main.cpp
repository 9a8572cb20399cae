// sgpf: sparse-grid uncertainty quantification for power flow.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "sgpf/analyticity.hpp"
#include "sgpf/case_io.hpp"
#include "sgpf/experiments.hpp"
#include "sgpf/moments.hpp"
#include "sgpf/newton.hpp"
#include "sgpf/powerflow.hpp"
#include "sgpf/sparse_grid.hpp"

namespace {

using namespace sgpf;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

/// "1,2,3" or "1-4".
std::vector<int> parse_levels(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-', 1);
        try {
            if (dash != std::string::npos) {
                const int a = std::stoi(item.substr(0, dash));
                const int b = std::stoi(item.substr(dash + 1));
                if (b < a) throw ConfigError("bad level range '" + item + "'");
                for (int w = a; w <= b; ++w) out.push_back(w);
            } else {
                out.push_back(std::stoi(item));
            }
        } catch (const std::logic_error&) {
            throw ConfigError("bad level list '" + text + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty level list");
    return out;
}

struct CommonFlags {
    std::string case_spec;
    std::string config;
    std::string rule;
    std::string levels;
    int ref_level = -1;
    int dims = -1;
    long long seed = -1;
    std::string out;
    int workers = -1;
    std::string cache;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--case", f.case_spec, "case file path, bundled:case39 or bundled:demo3");
    cmd->add_option("--config", f.config, "experiment config file (key = value lines)");
    cmd->add_option("--rule", f.rule, "sparse-grid rule")->check(CLI::IsMember({"smolyak", "td", "hc"}));
    cmd->add_option("--levels", f.levels, "levels, e.g. 1,2,3 or 1-4");
    cmd->add_option("--ref-level", f.ref_level, "reference level");
    cmd->add_option("--dims", f.dims, "parameter dimension N");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--out", f.out, "output file (default: stdout)");
    cmd->add_option("--workers", f.workers, "worker threads (0 = OpenMP default)");
    cmd->add_option("--cache", f.cache, "directory for cached surrogates");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig c;
    if (!f.config.empty()) c = load_config(f.config, c);
    if (!f.case_spec.empty()) c.case_spec = f.case_spec;
    if (!f.rule.empty()) c.rule = parse_rule_kind(f.rule);
    if (!f.levels.empty()) c.levels = parse_levels(f.levels);
    if (f.ref_level >= 0) c.reference_level = f.ref_level;
    if (f.dims >= 0) c.dims = f.dims;
    if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
    if (!f.out.empty()) c.out = f.out;
    if (f.workers >= 0) c.workers = f.workers;
    if (!f.cache.empty()) c.cache_dir = f.cache;
    return c;
}

/// Runs `body` with a stream bound to c.out or stdout.
template <typename Body>
int with_output(const std::string& path, Body body) {
    if (path.empty()) return body(std::cout);
    std::ofstream out(path);
    if (!out) throw CaseIoError("cannot write '" + path + "'");
    return body(out);
}

int cmd_solve(const CommonFlags& f, const std::string& start, double tol) {
    ExperimentConfig c = resolve(f);
    const PowerNetwork net = to_network(load_case(c.case_spec));
    const auto kind = start == "flat" ? StartKind::Flat : StartKind::FromCase;
    const auto res = solve_power_flow(net, kind, {tol, c.max_iter});
    return with_output(c.out, [&](std::ostream& os) {
        os << "case " << net.name() << " (" << net.buses().size() << " buses, "
           << net.branches().size() << " branches)\n";
        os << "status " << to_string(res.trace.status) << '\n';
        os << "iterations " << res.trace.iterations << '\n';
        os << std::scientific << std::setprecision(3) << "mismatch " << res.trace.residual_norms.back()
           << '\n';
        os << std::fixed;
        if (res.trace.status == NewtonStatus::Converged || res.trace.status == NewtonStatus::MaxIterations) {
            os << "bus type V theta_deg\n";
            for (const auto& b : net.buses()) {
                const double v = quantity_of_interest(net, res.x, {QoiSpec::Kind::Voltage, b.id});
                const double th = quantity_of_interest(net, res.x, {QoiSpec::Kind::Angle, b.id});
                os << std::setw(4) << b.id << ' ' << std::setw(5) << to_string(b.kind) << ' '
                   << std::setprecision(6) << v << ' ' << std::setprecision(4)
                   << th * 180.0 / std::numbers::pi << '\n';
            }
        }
        return res.trace.converged ? kOk : kFailure;
    });
}

int cmd_uq_convergence(const CommonFlags& f, bool no_timing) {
    ExperimentConfig c = resolve(f);
    if (no_timing) c.timing = false;
    const auto study = run_uq_convergence(c);
    return with_output(c.out, [&](std::ostream& os) {
        write_uq_csv(os, study);
        return kOk;
    });
}

int cmd_uq_moments(const CommonFlags& f, int level, std::size_t mc_samples) {
    ExperimentConfig c = resolve(f);
    validate_config(c);
    if (mc_samples > 0) c.mc_samples = mc_samples;
    const int w = level >= 0 ? level : c.levels.back();
    const PowerNetwork net = to_network(load_case(c.case_spec));
    const auto pert = make_perturbation(net, c);
    const KnotSolver solver(net, pert, c.qoi, {c.tol, c.max_iter}, c.start);
    const ParallelOptions popts{Execution::Parallel, c.workers};
    SurrogateBuilder builder(solver, GridRule{c.rule, NodeKind::ClenshawCurtis}, pert.n, popts);
    const Surrogate s = builder.build(w);
    const auto m = uniform_moments(s, popts);
    return with_output(c.out, [&](std::ostream& os) {
        os << std::setprecision(12);
        os << "level " << w << '\n' << "dims " << pert.n << '\n' << "knots " << s.plan().knot_count() << '\n';
        os << "mean " << m.mean << '\n' << "variance " << m.variance.value << '\n';
        if (m.variance.raw < 0.0) os << "variance_raw " << m.variance.raw << '\n';
        if (c.mc_samples > 0) {
            const auto mc = monte_carlo_oracle(
                [&solver](std::span<const double> q) { return solver(q)[0]; },
                std::vector<Density1D>(static_cast<std::size_t>(pert.n), Density1D::uniform()),
                c.mc_samples, c.seed);
            os << "mc_samples " << mc.samples << '\n' << "mc_mean " << mc.mean << '\n'
               << "mc_std_error " << mc.std_error << '\n' << "mc_variance " << mc.variance << '\n';
        }
        return kOk;
    });
}

void print_certificate(std::ostream& os, const KantorovichCertificate& k) {
    os << "kantorovich.kappa " << k.kappa << '\n';
    os << "kantorovich.delta " << k.delta << '\n';
    os << "kantorovich.lambda " << k.lambda << "  (sampled: " << k.probe_count << " probe pairs, radius "
       << k.ball_radius << ", seed " << k.seed << ")\n";
    os << "kantorovich.h " << k.h << '\n';
    os << "kantorovich.t_star " << k.t_star << '\n';
    os << "kantorovich.satisfied " << (k.satisfied ? "true" : "false") << '\n';
}

void print_bounds(std::ostream& os, const BoundConstants& bc, const ExperimentConfig& c,
                  const GridRule& rule) {
    os << "bound.sigma " << bc.sigma << '\n' << "bound.N " << bc.n << '\n'
       << "bound.M_tilde " << bc.m_tilde << '\n' << "bound.mu1 " << bc.mu1 << '\n'
       << "bound.mu2 " << bc.mu2 << '\n' << "bound.mu3 " << bc.mu3 << '\n'
       << "bound.delta_star " << bc.delta_star << '\n' << "bound.C1 " << bc.c1 << '\n'
       << "bound.C2_tilde " << bc.c2_tilde << '\n' << "bound.a " << bc.a_coef << '\n'
       << "bound.Q " << bc.q_coef << '\n';
    os << "bound.threshold_w " << bc.n / std::numbers::ln2 << '\n';
    os << "w eta regime bound\n";
    for (int w : c.levels) {
        const double eta = static_cast<double>(build_plan(rule, w, bc.n).knot_count());
        const auto b = convergence_bound(bc, w, eta);
        os << w << ' ' << eta << ' ' << to_string(b.regime) << ' ';
        if (b.available) {
            os << b.bound << '\n';
        } else {
            os << "unavailable (C1 within 1e-9 of 1)\n";
        }
    }
}

int certify_scalar(const ExperimentConfig& c) {
    // f(x; q) = x^2 - (2 + q/10), x0 = 1.5
    NewtonProblem p;
    p.residual = [](const Vector& x, const Vector& q) {
        return Vector::Constant(1, x(0) * x(0) - (2.0 + 0.1 * q(0)));
    };
    p.jacobian = [](const Vector& x, const Vector&) { return Matrix::Constant(1, 1, 2.0 * x(0)); };
    ComplexExtension e;
    e.residual = [](const CVector& z, const CVector& g) {
        return CVector::Constant(1, z(0) * z(0) - (2.0 + 0.1 * g(0)));
    };
    e.jacobian = [](const CVector& z, const CVector&) { return CMatrix::Constant(1, 1, 2.0 * z(0)); };
    const Vector x0 = Vector::Constant(1, 1.5);
    const auto k = kantorovich_certificate(p, x0, Vector::Zero(1), 0.5, 64, c.seed);
    const auto gc = gamma_constants(p, x0, 1, 9);
    const double ke = c.kappa_e_factor * gc.kappa;
    const double de = c.delta_e_factor * gc.delta;
    RegionSearchOptions ro;
    ro.sigma_cap = c.sigma_cap;
    ro.seed = c.seed;
    const auto region = admissible_region_search(e, x0, 1, gc.kappa, gc.delta, ke, de, ro);
    const auto ke_cert = certificate_from_constants(ke, de, k.lambda);
    return with_output(c.out, [&](std::ostream& os) {
        os << std::setprecision(10);
        os << "problem scalar f(x; q) = x^2 - (2 + q/10), x0 = 1.5\n";
        print_certificate(os, k);
        os << "region.kappa_gamma " << gc.kappa << '\n' << "region.delta_gamma " << gc.delta << '\n';
        os << "region.kappa_e " << ke << '\n' << "region.delta_e " << de << '\n';
        os << "region.sigma_hat " << region.region.sigma_hat[0] << '\n';
        const double sh = region.region.sigma_hat[0];
        if (sh > 0.0 && ke_cert.satisfied) {
            print_bounds(os, make_bound_constants(sh, 1, mtilde_bound(ke_cert.t_star, x0)), c,
                         GridRule{c.rule, NodeKind::ClenshawCurtis});
        } else {
            os << "bound unavailable (degenerate region or extended certificate not satisfied)\n";
        }
        return kOk;
    });
}

int cmd_certify(const CommonFlags& f, const std::string& problem, double ke_factor, double de_factor,
                bool skip_region) {
    ExperimentConfig c = resolve(f);
    if (ke_factor > 0.0) c.kappa_e_factor = ke_factor;
    if (de_factor > 0.0) c.delta_e_factor = de_factor;
    if (!(c.kappa_e_factor > 1.0)) throw ContractViolation("certify: kappa_e factor must exceed 1");
    if (problem == "scalar") return certify_scalar(c);

    const PowerNetwork net = to_network(load_case(c.case_spec));
    const auto pert = make_perturbation(net, c);
    const auto prob = power_flow_problem(net, pert);
    const Vector x0 = start_state(net, c.start);
    const auto k = kantorovich_certificate(prob, x0, Vector::Zero(pert.n), 0.05, 64, c.seed);
    const GridRule rule{c.rule, NodeKind::ClenshawCurtis};
    return with_output(c.out, [&](std::ostream& os) {
        os << std::setprecision(10);
        os << "case " << net.name() << '\n' << "dims " << pert.n << '\n';
        print_certificate(os, k);
        double sigma_hat = 0.0;
        double m_tilde = 0.0;
        if (!skip_region) {
            const auto gc = gamma_constants(prob, x0, pert.n, pert.n <= 3 ? 5 : 2);
            const double ke = c.kappa_e_factor * gc.kappa;
            const double de = c.delta_e_factor * gc.delta;
            RegionSearchOptions ro;
            ro.sigma_cap = c.sigma_cap;
            ro.seed = c.seed;
            const auto region = admissible_region_search(power_flow_extension(net, pert), x0, pert.n,
                                                         gc.kappa, gc.delta, ke, de, ro);
            os << "region.kappa_gamma " << gc.kappa << '\n' << "region.delta_gamma " << gc.delta << '\n';
            os << "region.kappa_e " << ke << '\n' << "region.delta_e " << de << '\n';
            os << "region.sigma_hat";
            for (double s : region.region.sigma_hat) os << ' ' << s;
            os << '\n';
            sigma_hat = region.region.min_sigma_hat();
            const auto ext = certificate_from_constants(ke, de, k.lambda);
            if (ext.satisfied) m_tilde = mtilde_bound(ext.t_star, x0);
        }
        if (sigma_hat > 0.0 && m_tilde > 0.0) {
            print_bounds(os, make_bound_constants(sigma_hat, pert.n, m_tilde), c, rule);
        } else {
            os << "bound.threshold_w " << pert.n / std::numbers::ln2 << '\n';
            os << "w eta regime\n";
            for (int w : c.levels) {
                const double n = pert.n;
                os << w << ' ' << build_plan(rule, w, pert.n).knot_count() << ' '
                   << (w > n / std::numbers::ln2 ? "sub-exponential" : "algebraic") << '\n';
            }
            if (!skip_region) os << "bound unavailable (degenerate region or extended certificate not satisfied)\n";
        }
        return kOk;
    });
}

int cmd_grid_info(const CommonFlags& f) {
    ExperimentConfig c = resolve(f);
    const int n = c.dims > 0 ? c.dims : 2;
    const GridRule rule{c.rule, NodeKind::ClenshawCurtis};
    return with_output(c.out, [&](std::ostream& os) {
        os << "rule " << to_string(c.rule) << "\ndims " << n << '\n';
        os << "w knots terms max_degree\n";
        for (int w : c.levels) {
            const auto plan = build_plan(rule, w, n);
            os << w << ' ' << plan.knot_count() << ' ' << plan.terms().size() << ' '
               << plan.max_degree() << '\n';
        }
        return kOk;
    });
}

int cmd_parse_case(const CommonFlags& f, bool canonical) {
    ExperimentConfig c = resolve(f);
    const CaseFile cf = load_case(c.case_spec);
    for (const auto& w : cf.warnings) std::cerr << "warning: line " << w.line << ": " << w.message << '\n';
    return with_output(c.out, [&](std::ostream& os) {
        if (canonical) {
            os << serialize(cf);
            return kOk;
        }
        const PowerNetwork net = to_network(cf);
        int pv = 0;
        int pq = 0;
        for (const auto& b : net.buses()) {
            pv += b.kind == BusKind::PV;
            pq += b.kind == BusKind::PQ;
        }
        os << "name " << cf.name << '\n' << "baseMVA " << cf.base_mva << '\n'
           << "bus_rows " << cf.bus_rows.size() << '\n' << "gen_rows " << cf.gen_rows.size() << '\n'
           << "branch_rows " << cf.branch_rows.size() << '\n'
           << "slack_bus " << net.buses()[static_cast<std::size_t>(net.slack_index())].id << '\n'
           << "pv_buses " << pv << '\n' << "pq_buses " << pq << '\n'
           << "warnings " << cf.warnings.size() << '\n';
        return kOk;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-grid uncertainty quantification for AC power flow"};
    app.require_subcommand(1);

    CommonFlags solve_f, conv_f, mom_f, cert_f, grid_f, parse_f;
    std::string start = "case";
    double tol = 1e-10;
    auto* solve_cmd = app.add_subcommand("solve", "solve the nominal power flow");
    add_common(solve_cmd, solve_f);
    solve_cmd->add_option("--start", start, "initial point")->check(CLI::IsMember({"flat", "case"}));
    solve_cmd->add_option("--tol", tol, "mismatch tolerance (per unit)");

    bool no_timing = false;
    auto* conv_cmd = app.add_subcommand("uq-convergence", "moment errors against a reference level (CSV)");
    add_common(conv_cmd, conv_f);
    conv_cmd->add_flag("--no-timing", no_timing, "write wall_ms as 0 for byte-identical reruns");

    int level = -1;
    std::size_t mc = 0;
    auto* mom_cmd = app.add_subcommand("uq-moments", "mean and variance of the QoI at one level");
    add_common(mom_cmd, mom_f);
    mom_cmd->add_option("--level", level, "sparse-grid level (default: last of --levels)");
    mom_cmd->add_option("--mc-samples", mc, "also run a seeded Monte Carlo check");

    std::string problem = "case";
    double ke_factor = 0.0;
    double de_factor = 0.0;
    bool skip_region = false;
    auto* cert_cmd = app.add_subcommand("certify", "Kantorovich certificate, analyticity region, rate bounds");
    add_common(cert_cmd, cert_f);
    cert_cmd->add_option("--problem", problem, "case or the built-in scalar problem")
        ->check(CLI::IsMember({"case", "scalar"}));
    cert_cmd->add_option("--kappa-e-factor", ke_factor, "kappa_e = factor * kappa (default 2)");
    cert_cmd->add_option("--delta-e-factor", de_factor, "delta_e = factor * delta (default 3)");
    cert_cmd->add_flag("--skip-region", skip_region, "skip the analyticity region search");

    auto* grid_cmd = app.add_subcommand("grid-info", "knot and term counts per level");
    add_common(grid_cmd, grid_f);

    bool canonical = false;
    auto* parse_cmd = app.add_subcommand("parse-case", "parse and validate a case file");
    add_common(parse_cmd, parse_f);
    parse_cmd->add_flag("--canonical", canonical, "print the canonical serialization");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(solve_f, start, tol);
        if (*conv_cmd) return cmd_uq_convergence(conv_f, no_timing);
        if (*mom_cmd) return cmd_uq_moments(mom_f, level, mc);
        if (*cert_cmd) return cmd_certify(cert_f, problem, ke_factor, de_factor, skip_region);
        if (*grid_cmd) return cmd_grid_info(grid_f);
        if (*parse_cmd) return cmd_parse_case(parse_f, canonical);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const KnotEvaluationError& e) {
        std::cerr << "error: knot " << e.knot() << " at q = (";
        for (std::size_t i = 0; i < e.point().size(); ++i) std::cerr << (i ? ", " : "") << e.point()[i];
        std::cerr << "): " << e.what() << '\n';
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
