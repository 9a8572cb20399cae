#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sgpf/case_io.hpp"
#include "sgpf/powerflow.hpp"

using namespace sgpf;

namespace {

Bus slack_bus(int id) {
    Bus b;
    b.id = id;
    b.kind = BusKind::Slack;
    return b;
}

Bus pq_bus(int id, double p, double q) {
    Bus b;
    b.id = id;
    b.kind = BusKind::PQ;
    b.p_load = p;
    b.q_load = q;
    return b;
}

Branch line(int f, int t, double r, double x, double bc = 0.0) {
    Branch br;
    br.from = f;
    br.to = t;
    br.r = r;
    br.x = x;
    br.b_charging = bc;
    return br;
}

PowerNetwork case39() { return to_network(bundled_case(BundledCase::NewEngland39)); }

}  // namespace

TEST_CASE("admittance matrix of a single line") {
    const PowerNetwork net("two", 100.0, {slack_bus(1), pq_bus(2, 0, 0)}, {line(1, 2, 0.01, 0.1, 0.02)});
    const auto& y = net.ybus();
    const Complex ys = 1.0 / Complex(0.01, 0.1);
    CHECK(std::abs(y(0, 0) - (ys + Complex(0, 0.01))) < 1e-12);
    CHECK(std::abs(y(1, 1) - (ys + Complex(0, 0.01))) < 1e-12);
    CHECK(std::abs(y(0, 1) + ys) < 1e-12);
    CHECK(std::abs(y(1, 0) + ys) < 1e-12);
}

TEST_CASE("admittance matrix with tap and phase shift") {
    Branch br = line(1, 2, 0.0, 0.2);
    br.tap = 1.05;
    br.phase_shift = 0.1;
    const PowerNetwork net("tap", 100.0, {slack_bus(1), pq_bus(2, 0, 0)}, {br});
    const auto& y = net.ybus();
    const Complex ys = 1.0 / Complex(0.0, 0.2);
    const Complex a = std::polar(1.05, 0.1);
    CHECK(std::abs(y(0, 0) - ys / (1.05 * 1.05)) < 1e-12);
    CHECK(std::abs(y(1, 1) - ys) < 1e-12);
    CHECK(std::abs(y(0, 1) + ys / std::conj(a)) < 1e-12);
    CHECK(std::abs(y(1, 0) + ys / a) < 1e-12);
}

TEST_CASE("network validation") {
    CHECK_THROWS_AS(PowerNetwork("x", 100.0, {pq_bus(1, 0, 0), pq_bus(2, 0, 0)}, {line(1, 2, 0, 0.1)}), ContractViolation);
    CHECK_THROWS_AS(PowerNetwork("x", 100.0, {slack_bus(1), pq_bus(2, 0, 0)}, {line(1, 3, 0, 0.1)}), ContractViolation);
    CHECK_THROWS_AS(PowerNetwork("x", 100.0, {slack_bus(1), pq_bus(2, 0, 0)}, {line(1, 2, 0, 0)}), ContractViolation);
    CHECK_THROWS_AS(PowerNetwork("x", 100.0, {slack_bus(1), slack_bus(2)}, {line(1, 2, 0, 0.1)}), ContractViolation);
    const PowerNetwork net("ok", 100.0, {slack_bus(1), pq_bus(2, 0, 0)}, {line(1, 2, 0, 0.1)});
    CHECK(net.index_of(2) == 1);
    CHECK_THROWS_AS((void)net.index_of(7), ContractViolation);
}

TEST_CASE("unloaded network has zero residual at the flat state") {
    const PowerNetwork net("flat", 100.0, {slack_bus(1), pq_bus(2, 0, 0), pq_bus(3, 0, 0)},
                           {line(1, 2, 0.01, 0.1, 0.0), line(2, 3, 0.02, 0.2), line(1, 3, 0.0, 0.3)});
    const auto x = start_state(net, StartKind::Flat);
    CHECK(residual(net, x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two-bus closed form") {
    // V^4 + (2 Q X - 1) V^2 + X^2 (P^2 + Q^2) = 0 for a lossless line from a 1.0 pu slack
    const double p = 0.5;
    const double q = 0.2;
    const double x = 0.1;
    const PowerNetwork net("two", 100.0, {slack_bus(1), pq_bus(2, p, q)}, {line(1, 2, 0.0, x)});
    const auto r = solve_power_flow(net, StartKind::Flat, {1e-13, 20});
    REQUIRE(r.trace.converged);
    const double bq = 1.0 - 2.0 * q * x;
    const double u = (bq + std::sqrt(bq * bq - 4.0 * x * x * (p * p + q * q))) / 2.0;
    CHECK(r.state.v(0) == doctest::Approx(std::sqrt(u)).epsilon(1e-12));
    CHECK(r.state.theta(0) == doctest::Approx(std::asin(-p * x / std::sqrt(u))).epsilon(1e-12));
}

TEST_CASE("analytic jacobian matches finite differences") {
    const auto net = case39();
    const auto problem = power_flow_problem(net, StochasticPerturbation{});
    const auto x0 = start_state(net, StartKind::FromCase);
    std::mt19937_64 rng(39);
    std::uniform_real_distribution<double> dth(-0.2, 0.2);
    std::uniform_real_distribution<double> dv(-0.1, 0.1);
    const auto na = static_cast<Eigen::Index>(net.angle_buses().size());
    for (int trial = 0; trial < 39; ++trial) {
        Vector x = x0;
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += i < na ? dth(rng) : dv(rng);
        CHECK(jacobian_fd_error(problem, x, Vector()) < 1e-6);
    }
}

TEST_CASE("complex model agrees with the real one on real inputs") {
    const auto net = case39();
    StochasticPerturbation pert;
    pert.n = 2;
    pert.loads.push_back({20, 0.5, 0.5, {0}});
    pert.admittances.push_back({35, 0.5, 0.5, {1}});
    const std::vector<double> qr = {0.3, -0.6};
    const std::vector<Complex> qc = {Complex(0.3), Complex(-0.6)};
    const auto mr = build_model<double>(net, pert, qr);
    const auto mc = build_model<Complex>(net, pert, qc);
    const auto x = start_state(net, StartKind::FromCase);
    const CVector xc = x.cast<Complex>();
    const auto rr = residual(mr, x);
    const auto rc = residual(mc, xc);
    CHECK((rc.real() - rr).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(rc.imag().cwiseAbs().maxCoeff() == 0.0);
    const auto jr = jacobian(mr, x);
    const auto jc = jacobian(mc, xc);
    CHECK((jc.real() - jr).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(jc.imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lossless network conserves active power") {
    std::vector<Branch> br = {line(1, 2, 0.0, 0.1), line(2, 3, 0.0, 0.2), line(1, 3, 0.0, 0.15)};
    const PowerNetwork net("lossless", 100.0, {slack_bus(1), pq_bus(2, 0.4, 0.1), pq_bus(3, 0.3, 0.05)}, br);
    const auto r = solve_power_flow(net, StartKind::Flat, {1e-12, 20});
    REQUIRE(r.trace.converged);
    const auto m = build_model(net);
    Vector p;
    Vector q;
    bus_injections(m, r.x, p, q);
    CHECK(std::abs(p.sum()) < 1e-10);
    CHECK(p(0) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("case39 power flow") {
    const auto net = case39();
    CHECK(net.buses().size() == 39);
    CHECK(net.state_size() == 38 + 29);
    SUBCASE("flat start converges quadratically to a plausible state") {
        const auto r = solve_power_flow(net, StartKind::Flat);
        REQUIRE(r.trace.converged);
        CHECK(r.trace.iterations <= 6);
        CHECK(r.state.v.minCoeff() > 0.9);
        CHECK(r.state.v.maxCoeff() < 1.1);
        const double v22 = quantity_of_interest(net, r.x, {QoiSpec::Kind::Voltage, 22});
        CHECK(v22 > 0.8);
        CHECK(v22 < 1.2);
        // stored case state is the converged solution
        const auto rc = solve_power_flow(net, StartKind::FromCase);
        CHECK(rc.trace.converged);
        CHECK((rc.x - r.x).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("solves are deterministic") {
        const auto a = solve_power_flow(net, StartKind::Flat);
        const auto b = solve_power_flow(net, StartKind::Flat);
        CHECK(a.x == b.x);
    }
    SUBCASE("fixed quantities report setpoints") {
        const auto x = start_state(net, StartKind::FromCase);
        const int slack_id = net.buses()[static_cast<std::size_t>(net.slack_index())].id;
        CHECK(quantity_of_interest(net, x, {QoiSpec::Kind::Angle, slack_id}) == 0.0);
        CHECK(quantity_of_interest(net, x, {QoiSpec::Kind::Voltage, slack_id}) ==
              net.buses()[static_cast<std::size_t>(net.slack_index())].v_setpoint);
    }
    SUBCASE("heavy overload does not converge") {
        std::vector<Bus> buses = net.buses();
        for (auto& b : buses) {
            b.p_load *= 20.0;
            b.q_load *= 20.0;
        }
        const PowerNetwork heavy("heavy", net.base_mva(), buses, net.branches());
        const auto r = solve_power_flow(heavy, StartKind::Flat, {1e-10, 30});
        CHECK_FALSE(r.trace.converged);
        CHECK(r.trace.status != NewtonStatus::Converged);
    }
}

TEST_CASE("stochastic perturbations") {
    const auto net = case39();
    StochasticPerturbation pert;
    pert.n = 3;
    pert.loads.push_back({20, 0.5, 0.5, {0}});
    pert.loads.push_back({21, 0.5, 0.25, {1, 2}});
    SUBCASE("zero parameters leave the network unchanged") {
        const std::vector<double> q = {0.0, 0.0, 0.0};
        const auto p = apply_perturbation(net, pert, q);
        CHECK(p.buses() == net.buses());
        CHECK(p.branches() == net.branches());
    }
    SUBCASE("loads scale by 1 + c q") {
        const std::vector<double> q = {1.0, -1.0, 0.5};
        const auto p = apply_perturbation(net, pert, q);
        const auto& b0 = net.buses()[static_cast<std::size_t>(net.index_of(20))];
        const auto& b1 = p.buses()[static_cast<std::size_t>(p.index_of(20))];
        CHECK(b1.p_load == doctest::Approx(1.5 * b0.p_load));
        CHECK(b1.q_load == doctest::Approx(1.5 * b0.q_load));
        const auto& c0 = net.buses()[static_cast<std::size_t>(net.index_of(21))];
        const auto& c1 = p.buses()[static_cast<std::size_t>(p.index_of(21))];
        CHECK(c1.p_load == doctest::Approx(0.5 * c0.p_load));
        CHECK(c1.q_load == doctest::Approx(1.125 * c0.q_load));
    }
    SUBCASE("model and rebuilt network agree") {
        const std::vector<double> q = {0.7, -0.2, 0.9};
        const auto direct = build_model<double>(net, pert, q);
        const auto rebuilt_net = apply_perturbation(net, pert, q);
        const auto rebuilt = build_model(rebuilt_net);
        const auto x = start_state(net, StartKind::FromCase);
        CHECK((residual(direct, x) - residual(rebuilt, x)).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("admittance scaling only touches the scaled branches") {
        StochasticPerturbation ap;
        ap.n = 2;
        ap.admittances.push_back({35, 0.5, 0.5, {0}});
        ap.admittances.push_back({37, 0.5, 0.3, {1}});
        const std::vector<double> q = {0.8, -0.9};
        const auto p = apply_perturbation(net, ap, q);
        CHECK(p.branches()[34].g_scale == doctest::Approx(1.4));
        CHECK(p.branches()[36].b_scale == doctest::Approx(1.0 - 0.27));
        // branch 35 is 21-22, branch 37 is 22-35
        const CMatrix dy = p.ybus() - net.ybus();
        std::vector<int> touched = {net.index_of(21), net.index_of(22), net.index_of(35)};
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            for (Eigen::Index c = 0; c < dy.cols(); ++c) {
                const bool inside = std::count(touched.begin(), touched.end(), r) && std::count(touched.begin(), touched.end(), c);
                if (!inside) CHECK(dy(r, c) == Complex(0.0));
            }
        }
        CHECK(dy(net.index_of(21), net.index_of(35)) == Complex(0.0));
        // the series part of each scaled branch still sums to zero across its row
        CHECK(std::abs(dy.row(net.index_of(21)).sum()) < 1e-10);
        const Complex ys = 1.0 / Complex(net.branches()[34].r, net.branches()[34].x);
        CHECK(std::abs(dy(net.index_of(21), net.index_of(22)) + Complex(0.4 * ys.real(), 0.4 * ys.imag())) < 1e-10);
    }
    SUBCASE("bad perturbations are rejected") {
        StochasticPerturbation bad = pert;
        bad.loads[0].dims = {5};
        CHECK_THROWS_AS(bad.validate(net), ContractViolation);
        bad = pert;
        bad.loads[0].bus = 999;
        CHECK_THROWS_AS(bad.validate(net), ContractViolation);
        bad = pert;
        bad.admittances.push_back({47, 0.5, 0.5, {0}});
        CHECK_THROWS_AS(bad.validate(net), ContractViolation);
        const std::vector<double> wrong = {0.0};
        CHECK_THROWS_AS((void)apply_perturbation(net, pert, wrong), ContractViolation);
    }
}

TEST_CASE("nonpositive magnitudes are a domain error") {
    const auto net = case39();
    Vector x = start_state(net, StartKind::Flat);
    x(x.size() - 1) = -0.5;
    CHECK_THROWS_AS((void)residual(net, x), DomainError);
}
