// Serial reference path vs OpenMP path for the three data-parallel kernels.
// Usage: bench_kernels [workers]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include "sgpf/case_io.hpp"
#include "sgpf/experiments.hpp"
#include "sgpf/moments.hpp"
#include "sgpf/sparse_grid.hpp"

using namespace sgpf;

namespace {

double time_ms(const std::function<void()>& f, int reps) {
    f();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void row(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s %10.2f %10.2f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int workers = argc > 1 ? std::atoi(argv[1]) : 0;
    const ParallelOptions ser{Execution::Serial, 1};
    const ParallelOptions par{Execution::Parallel, workers};
    std::printf("workers %d\n", effective_workers(par));
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial_ms", "omp_ms", "speedup");

    // knot evaluation: case39 power flow, N = 4, w = 3
    {
        const auto net = to_network(bundled_case(BundledCase::NewEngland39));
        ExperimentConfig c;
        c.dims = 4;
        const auto pert = make_perturbation(net, c);
        const KnotSolver solver(net, pert, c.qoi, {c.tol, c.max_iter}, c.start);
        const auto plan = std::make_shared<const SparseGridPlan>(build_plan(GridRule::smolyak(), 3, 4));
        const KnotFunction f = [&solver](std::span<const double> q) { return solver(q); };
        Surrogate a = build_surrogate(plan, f, ser);
        Surrogate b = a;
        const double ts = time_ms([&] { a = build_surrogate(plan, f, ser); }, 3);
        const double tp = time_ms([&] { b = build_surrogate(plan, f, par); }, 3);
        row(("knots case39 N=4 w=3 (" + std::to_string(plan->knot_count()) + ")").c_str(), ts, tp,
            a.values() == b.values());
    }

    // batch surrogate evaluation: N = 6, w = 5, 2000 points
    {
        const auto plan = std::make_shared<const SparseGridPlan>(build_plan(GridRule::smolyak(), 5, 6));
        const auto s = build_surrogate(plan, [](std::span<const double> q) {
            double v = 0.0;
            for (std::size_t d = 0; d < q.size(); ++d) v += std::exp(0.3 * q[d]) / (2.0 + q[d]);
            return std::vector<double>{v};
        });
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::vector<double> pts(6 * 2000);
        for (auto& p : pts) p = u(rng);
        std::vector<double> a;
        std::vector<double> b;
        const double ts = time_ms([&] { a = evaluate_surrogate_batch(s, pts, ser); }, 3);
        const double tp = time_ms([&] { b = evaluate_surrogate_batch(s, pts, par); }, 3);
        row("batch eval N=6 w=5 x2000", ts, tp, a == b);
    }

    // quadrature accumulation: N = 4 tensor rule with 24^4 points
    {
        const std::vector<Density1D> rho(4, Density1D::uniform());
        const auto qp = tensor_quadrature(rho, 24);
        const auto dm = DensityModel::uniform(4);
        auto f = [](std::span<const double> q) { return std::sin(q[0] + q[1]) * std::exp(q[2] * q[3]); };
        VarianceEstimate a;
        VarianceEstimate b;
        const double ts = time_ms([&] { a = variance(f, dm, qp, ser); }, 5);
        const double tp = time_ms([&] { b = variance(f, dm, qp, par); }, 5);
        row("quadrature N=4 24^4 points", ts, tp, a.raw == b.raw);
    }
    return 0;
}
