#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "sgpf/linalg.hpp"
#include "sgpf/sparse_grid.hpp"

using namespace sgpf;

namespace {

std::shared_ptr<const SparseGridPlan> make_plan(const GridRule& rule, int w, int n) {
    return std::make_shared<const SparseGridPlan>(build_plan(rule, w, n));
}

double monomial(std::span<const double> q, const std::vector<int>& deg) {
    double v = 1.0;
    for (std::size_t d = 0; d < deg.size(); ++d) v *= std::pow(q[d], deg[d]);
    return v;
}

std::vector<double> random_points(int n, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> pts(static_cast<std::size_t>(n * count));
    for (auto& p : pts) p = u(rng);
    return pts;
}

}  // namespace

TEST_CASE("smolyak knot counts") {
    const int two_d[] = {1, 5, 13, 29, 65};
    for (int w = 0; w <= 4; ++w) CHECK(build_plan(GridRule::smolyak(), w, 2).knot_count() == two_d[w]);
    const int one_d[] = {1, 3, 5, 9, 17};
    for (int w = 0; w <= 4; ++w) CHECK(build_plan(GridRule::smolyak(), w, 1).knot_count() == one_d[w]);
    // N=3 counts of the Clenshaw-Curtis Smolyak grid
    const int three_d[] = {1, 7, 25, 69};
    for (int w = 0; w <= 3; ++w) CHECK(build_plan(GridRule::smolyak(), w, 3).knot_count() == three_d[w]);
}

TEST_CASE("admissible indices and coefficients") {
    SUBCASE("smolyak N=2 w=2") {
        const auto idx = admissible_indices(GridRule::smolyak(), 2, 2);
        CHECK(idx.size() == 6);
        const auto cc = combination_coefficients(GridRule::smolyak(), 2, 2);
        int sum = 0;
        for (const auto& [i, c] : cc) {
            const int g = i[0] + i[1] - 2;
            if (g == 2) CHECK(c == 1);
            if (g == 1) CHECK(c == -1);
            CHECK(g >= 1);
            sum += c;
        }
        CHECK(sum == 1);
    }
    SUBCASE("coefficients sum to one for every rule") {
        for (const auto& rule : {GridRule::smolyak(), GridRule::total_degree(), GridRule::hyperbolic_cross()}) {
            for (int n = 1; n <= 4; ++n) {
                for (int w = 0; w <= 4; ++w) {
                    int sum = 0;
                    for (const auto& [i, c] : combination_coefficients(rule, w, n)) sum += c;
                    CHECK(sum == 1);
                }
            }
        }
    }
    SUBCASE("hyperbolic cross constraint") {
        const auto rule = GridRule::hyperbolic_cross();
        for (const auto& i : admissible_indices(rule, 5, 2)) CHECK(i[0] * i[1] <= 6);
        const int lv[] = {2, 3};
        CHECK(rule.admissible(lv, 5));
        CHECK_FALSE(rule.admissible(lv, 4));
    }
    CHECK_THROWS_AS((void)build_plan(GridRule::smolyak(), -1, 2), ContractViolation);
    CHECK_THROWS_AS((void)build_plan(GridRule::smolyak(), 2, 0), ContractViolation);
}

TEST_CASE("rule names round-trip") {
    for (auto k : {RuleKind::Smolyak, RuleKind::TotalDegree, RuleKind::HyperbolicCross}) {
        CHECK(parse_rule_kind(to_string(k)) == k);
    }
    CHECK_THROWS((void)parse_rule_kind("sparse"));
}

TEST_CASE("knots are unique and nested across levels") {
    for (int n : {1, 2, 3}) {
        std::set<std::vector<double>> prev;
        for (int w = 0; w <= 4; ++w) {
            const auto plan = build_plan(GridRule::smolyak(), w, n);
            std::set<std::vector<double>> cur;
            for (std::size_t k = 0; k < plan.knot_count(); ++k) {
                const auto p = plan.knot(k);
                cur.emplace(p.begin(), p.end());
            }
            CHECK(cur.size() == plan.knot_count());
            for (const auto& p : prev) CHECK(cur.count(p) == 1);
            prev = std::move(cur);
        }
    }
}

TEST_CASE("surrogates reproduce their polynomial space exactly") {
    for (const auto& rule : {GridRule::smolyak(), GridRule::total_degree(), GridRule::hyperbolic_cross()}) {
        for (int n : {1, 2, 3}) {
            for (int w : {1, 2, 3}) {
                const auto plan = make_plan(rule, w, n);
                const auto space = polynomial_space(rule, w, n);
                REQUIRE_FALSE(space.empty());
                const auto pts = random_points(n, 20, 11);
                for (const auto& deg : space) {
                    const auto s = build_surrogate(plan, [&](std::span<const double> q) {
                        return std::vector<double>{monomial(q, deg)};
                    });
                    for (int t = 0; t < 20; ++t) {
                        std::span<const double> q(pts.data() + t * n, static_cast<std::size_t>(n));
                        CHECK(evaluate_surrogate(s, q)[0] == doctest::Approx(monomial(q, deg)).epsilon(1e-11).scale(1.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("smolyak space is total degree for w <= 1") {
    const auto space = polynomial_space(GridRule::smolyak(), 1, 2);
    std::set<std::vector<int>> s(space.begin(), space.end());
    CHECK(s.count({2, 0}) == 1);
    CHECK(s.count({0, 2}) == 1);
    CHECK(s.count({1, 1}) == 0);
}

TEST_CASE("surrogate interpolates at knots") {
    const auto plan = make_plan(GridRule::smolyak(), 3, 2);
    auto f = [](std::span<const double> q) { return std::vector<double>{std::exp(q[0]) * std::cos(q[1]), 1.0 / (3.0 - q[0] - q[1])}; };
    const auto s = build_surrogate(plan, f);
    REQUIRE(s.qoi_count() == 2);
    for (std::size_t k = 0; k < plan->knot_count(); ++k) {
        const auto v = evaluate_surrogate(s, plan->knot(k));
        const auto e = f(plan->knot(k));
        CHECK(v[0] == doctest::Approx(e[0]).epsilon(1e-13));
        CHECK(v[1] == doctest::Approx(e[1]).epsilon(1e-13));
    }
}

TEST_CASE("interpolation error decays for analytic functions") {
    auto f = [](std::span<const double> q) { return std::vector<double>{1.0 / (2.5 - q[0] - 0.5 * q[1])}; };
    const auto pts = random_points(2, 200, 5);
    double prev = 1e300;
    for (int w = 1; w <= 6; ++w) {
        const auto s = build_surrogate(make_plan(GridRule::smolyak(), w, 2), f);
        const auto vals = evaluate_surrogate_batch(s, pts);
        double err = 0.0;
        for (int t = 0; t < 200; ++t) {
            err = std::max(err, std::abs(vals[t] - f(std::span<const double>(pts.data() + 2 * t, 2))[0]));
        }
        CHECK(err < prev);
        prev = err;
    }
    CHECK(prev < 1e-4);
}

TEST_CASE("serial and parallel paths agree bitwise") {
    const auto plan = make_plan(GridRule::smolyak(), 5, 3);
    auto f = [](std::span<const double> q) { return std::vector<double>{std::sin(q[0] + 2 * q[1]) * q[2], q[0] * q[1]}; };
    const auto serial = build_surrogate(plan, f, {Execution::Serial});
    const auto par = build_surrogate(plan, f, {Execution::Parallel, 4});
    CHECK(serial.values() == par.values());
    const auto pts = random_points(3, 500, 9);
    const auto a = evaluate_surrogate_batch(serial, pts, {Execution::Serial});
    const auto b = evaluate_surrogate_batch(serial, pts, {Execution::Parallel, 4});
    CHECK(a == b);
    for (int t = 0; t < 500; t += 97) {
        const auto single = evaluate_surrogate(serial, std::span<const double>(pts.data() + 3 * t, 3));
        CHECK(single[0] == a[2 * t]);
        CHECK(single[1] == a[2 * t + 1]);
    }
}

TEST_CASE("knot failures report the lowest failing knot") {
    const auto plan = make_plan(GridRule::smolyak(), 3, 2);
    auto f = [](std::span<const double> q) -> std::vector<double> {
        if (q[0] > 0.5) throw std::runtime_error("no solution");
        return {q[0]};
    };
    std::size_t first = plan->knot_count();
    for (std::size_t k = 0; k < plan->knot_count(); ++k) {
        if (plan->knot(k)[0] > 0.5) {
            first = k;
            break;
        }
    }
    REQUIRE(first < plan->knot_count());
    for (auto ex : {Execution::Serial, Execution::Parallel}) {
        try {
            (void)build_surrogate(plan, f, {ex, 4});
            FAIL("expected KnotEvaluationError");
        } catch (const KnotEvaluationError& e) {
            CHECK(e.knot() == first);
            CHECK(e.point()[0] > 0.5);
        }
    }
}

TEST_CASE("surrogate serialization round-trips bitwise") {
    const auto plan = make_plan(GridRule::smolyak(), 3, 2);
    const auto s = build_surrogate(plan, [](std::span<const double> q) { return std::vector<double>{std::exp(q[0] - q[1]) / 3.0}; });
    std::stringstream ss;
    write_surrogate(ss, s);
    const auto r = read_surrogate(ss);
    CHECK(r.values() == s.values());
    CHECK(r.plan().knot_count() == plan->knot_count());
    CHECK(r.plan().rule() == plan->rule());
    const double q[] = {0.3, -0.7};
    CHECK(evaluate_surrogate(r, q) == evaluate_surrogate(s, q));

    std::stringstream bad("# sgpf-surrogate v1\ngarbage\n");
    CHECK_THROWS_AS((void)read_surrogate(bad), std::runtime_error);
}
