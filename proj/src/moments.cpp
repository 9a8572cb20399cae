#include "sgpf/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgpf/linalg.hpp"

namespace sgpf {

DensityModel DensityModel::uniform(int n) {
    DensityModel m;
    m.rho_hat.assign(static_cast<std::size_t>(n), Density1D::uniform());
    return m;
}

namespace {

void append_tensor(const std::vector<const GaussRule*>& rules, double scale, QuadraturePlan& out) {
    const std::size_t dn = rules.size();
    std::vector<std::size_t> counter(dn, 0);
    std::size_t total = 1;
    for (const auto* r : rules) total *= r->weights.size();
    for (std::size_t p = 0; p < total; ++p) {
        double w = scale;
        for (std::size_t d = 0; d < dn; ++d) {
            out.points.push_back(rules[d]->nodes.points[counter[d]]);
            w *= rules[d]->weights[counter[d]];
        }
        out.weights.push_back(w);
        for (std::size_t d = 0; d < dn; ++d) {
            if (++counter[d] < rules[d]->weights.size()) break;
            counter[d] = 0;
        }
    }
}

std::size_t sparse_point_count(int n, int level) {
    std::size_t total = 0;
    for (const auto& [idx, c] : combination_coefficients(GridRule::total_degree(), level, n)) {
        std::size_t t = 1;
        for (int i : idx) t *= static_cast<std::size_t>(2 * i - 1);
        total += t;
    }
    return total;
}

void check_density(const DensityModel& density, const QuadraturePlan& plan) {
    if (density.dim() != plan.dim) {
        throw ContractViolation("moments: density and quadrature dimensions differ");
    }
}

}  // namespace

QuadraturePlan tensor_quadrature(const std::vector<Density1D>& rho_hat, int per_dim) {
    if (rho_hat.empty()) throw ContractViolation("tensor_quadrature: empty density list");
    QuadraturePlan plan;
    plan.structure = QuadratureStructure::Tensor;
    plan.dim = static_cast<int>(rho_hat.size());
    std::vector<const GaussRule*> ptrs;
    for (const auto& d : rho_hat) plan.rules.push_back(gauss_nodes(per_dim, d));
    for (const auto& r : plan.rules) ptrs.push_back(&r);
    append_tensor(ptrs, 1.0, plan);
    return plan;
}

QuadraturePlan sparse_quadrature(const std::vector<Density1D>& rho_hat, int level) {
    if (rho_hat.empty()) throw ContractViolation("sparse_quadrature: empty density list");
    const int n = static_cast<int>(rho_hat.size());
    QuadraturePlan plan;
    plan.structure = QuadratureStructure::Sparse;
    plan.dim = n;
    // rules_by[d][i] = Gauss rule with 2i-1 points for density d
    std::vector<std::map<int, GaussRule>> rules_by(rho_hat.size());
    for (const auto& [idx, c] : combination_coefficients(GridRule::total_degree(), level, n)) {
        std::vector<const GaussRule*> ptrs(idx.size());
        for (std::size_t d = 0; d < idx.size(); ++d) {
            auto it = rules_by[d].find(idx[d]);
            if (it == rules_by[d].end()) {
                it = rules_by[d].emplace(idx[d], gauss_nodes(2 * idx[d] - 1, rho_hat[d])).first;
            }
            ptrs[d] = &it->second;
        }
        append_tensor(ptrs, static_cast<double>(c), plan);
    }
    for (std::size_t d = 0; d < rho_hat.size(); ++d) plan.rules.push_back(rules_by[d].rbegin()->second);
    return plan;
}

QuadraturePlan default_quadrature(const std::vector<Density1D>& rho_hat, int max_degree,
                                  std::size_t point_budget) {
    const int per_dim = (max_degree + 1) / 2 + 1;
    const int n = static_cast<int>(rho_hat.size());
    const double tensor_points = std::pow(static_cast<double>(per_dim), n);
    if (tensor_points <= static_cast<double>(point_budget)) return tensor_quadrature(rho_hat, per_dim);
    int level = 0;
    while (sparse_point_count(n, level + 1) <= point_budget) ++level;
    return sparse_quadrature(rho_hat, level);
}

namespace {

/// Fills f(q_k) for every quadrature point.
std::vector<double> sample_points(const PointFunction& target, const QuadraturePlan& plan,
                                  const ParallelOptions& opts) {
    const std::size_t n = plan.size();
    std::vector<double> out(n);
    if (opts.execution == Execution::Serial) {
        for (std::size_t k = 0; k < n; ++k) out[k] = target(plan.point(k));
        return out;
    }
    const int workers = effective_workers(opts);
    const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(workers)
    for (long long k = 0; k < nn; ++k) {
        out[static_cast<std::size_t>(k)] = target(plan.point(static_cast<std::size_t>(k)));
    }
    return out;
}

std::vector<double> ratio_weights(const DensityModel& density, const QuadraturePlan& plan) {
    std::vector<double> w = plan.weights;
    if (!density.ratio) return w;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double r = density.ratio(plan.point(k));
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw ContractViolation("moments: density ratio must be finite and nonnegative");
        }
        w[k] *= r;
    }
    return w;
}

MomentEstimate moments_from_values(std::span<const double> values, std::span<const double> w,
                                   std::size_t stride, std::size_t offset) {
    const std::size_t n = w.size();
    std::vector<double> terms(n);
    for (std::size_t k = 0; k < n; ++k) terms[k] = w[k] * values[k * stride + offset];
    MomentEstimate m;
    m.mean = pairwise_sum(terms);
    // centred second pass; negative quadrature weights can still make it < 0
    for (std::size_t k = 0; k < n; ++k) {
        const double d = values[k * stride + offset] - m.mean;
        terms[k] = w[k] * d * d;
    }
    m.variance.raw = pairwise_sum(terms);
    m.variance.value = std::max(0.0, m.variance.raw);
    return m;
}

}  // namespace

double expectation(const PointFunction& target, const DensityModel& density,
                   const QuadraturePlan& plan, const ParallelOptions& opts) {
    check_density(density, plan);
    const auto values = sample_points(target, plan, opts);
    const auto w = ratio_weights(density, plan);
    return moments_from_values(values, w, 1, 0).mean;
}

VarianceEstimate variance(const PointFunction& target, const DensityModel& density,
                          const QuadraturePlan& plan, const ParallelOptions& opts) {
    check_density(density, plan);
    const auto values = sample_points(target, plan, opts);
    const auto w = ratio_weights(density, plan);
    return moments_from_values(values, w, 1, 0).variance;
}

std::vector<MomentEstimate> surrogate_moments(const Surrogate& s, const DensityModel& density,
                                              const QuadraturePlan& plan,
                                              const ParallelOptions& opts) {
    check_density(density, plan);
    if (plan.dim != s.plan().dim()) {
        throw ContractViolation("moments: surrogate and quadrature dimensions differ");
    }
    const auto values = evaluate_surrogate_batch(s, plan.points, opts);
    const auto w = ratio_weights(density, plan);
    std::vector<MomentEstimate> out;
    for (std::size_t j = 0; j < s.qoi_count(); ++j) {
        out.push_back(moments_from_values(values, w, s.qoi_count(), j));
    }
    return out;
}

double expectation(const Surrogate& s, std::size_t qoi, const DensityModel& density,
                   const QuadraturePlan& plan, const ParallelOptions& opts) {
    return surrogate_moments(s, density, plan, opts).at(qoi).mean;
}

VarianceEstimate variance(const Surrogate& s, std::size_t qoi, const DensityModel& density,
                          const QuadraturePlan& plan, const ParallelOptions& opts) {
    return surrogate_moments(s, density, plan, opts).at(qoi).variance;
}

MonteCarloEstimate monte_carlo_oracle(const PointFunction& f, int dim, const PointSampler& sampler,
                                      std::size_t n, std::uint64_t seed) {
    if (n < 2) throw ContractViolation("monte_carlo_oracle: need at least two samples");
    std::mt19937_64 rng(seed);
    std::vector<double> q(static_cast<std::size_t>(dim));
    // Welford
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sampler(rng, q);
        const double x = f(q);
        const double delta = x - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (x - mean);
    }
    MonteCarloEstimate out;
    out.samples = n;
    out.mean = mean;
    out.variance = m2 / static_cast<double>(n - 1);
    out.std_error = std::sqrt(out.variance / static_cast<double>(n));
    return out;
}

MonteCarloEstimate monte_carlo_oracle(const PointFunction& f, const std::vector<Density1D>& rho,
                                      std::size_t n, std::uint64_t seed) {
    return monte_carlo_oracle(
        f, static_cast<int>(rho.size()),
        [&rho](std::mt19937_64& rng, std::span<double> q) {
            for (std::size_t d = 0; d < rho.size(); ++d) q[d] = rho[d].sample(rng);
        },
        n, seed);
}

}  // namespace sgpf
