#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "sgpf/nodes1d.hpp"
#include "sgpf/parallel.hpp"
#include "sgpf/sparse_grid.hpp"

namespace sgpf {

using PointFunction = std::function<double(std::span<const double>)>;

/// True density rho expressed through a factorised auxiliary density rho_hat
/// and the ratio rho / rho_hat. An empty ratio means rho == rho_hat.
struct DensityModel {
    std::vector<Density1D> rho_hat;
    PointFunction ratio;

    static DensityModel uniform(int n);
    [[nodiscard]] int dim() const noexcept { return static_cast<int>(rho_hat.size()); }
};

enum class QuadratureStructure { Tensor, Sparse };

struct QuadraturePlan {
    QuadratureStructure structure = QuadratureStructure::Tensor;
    int dim = 0;
    /// Per-dimension Gauss rules (tensor plans) or the finest 1D rule used (sparse plans).
    std::vector<GaussRule> rules;
    /// Row-major points, `dim` coordinates each.
    std::vector<double> points;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const noexcept { return weights.size(); }
    [[nodiscard]] std::span<const double> point(std::size_t k) const {
        return {points.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

/// Tensor Gauss rule with `per_dim` points along every dimension; the global
/// index runs with the first dimension fastest.
[[nodiscard]] QuadraturePlan tensor_quadrature(const std::vector<Density1D>& rho_hat, int per_dim);

/// Smolyak combination of Gauss rules with 2i-1 points at level i.
[[nodiscard]] QuadraturePlan sparse_quadrature(const std::vector<Density1D>& rho_hat, int level);

/// Tensor rule with ceil(max_degree/2)+1 points per dimension when it has at
/// most `point_budget` points; otherwise the finest sparse rule within budget.
[[nodiscard]] QuadraturePlan default_quadrature(const std::vector<Density1D>& rho_hat,
                                                int max_degree,
                                                std::size_t point_budget = std::size_t{1} << 20);

struct VarianceEstimate {
    double value = 0.0;  ///< clamped at zero
    double raw = 0.0;    ///< sum_k w_k (u_k - mean)^2 before clamping
};

struct MomentEstimate {
    double mean = 0.0;
    VarianceEstimate variance;
};

[[nodiscard]] double expectation(const PointFunction& target, const DensityModel& density,
                                 const QuadraturePlan& plan, const ParallelOptions& opts = {});
[[nodiscard]] VarianceEstimate variance(const PointFunction& target, const DensityModel& density,
                                        const QuadraturePlan& plan, const ParallelOptions& opts = {});

[[nodiscard]] double expectation(const Surrogate& s, std::size_t qoi, const DensityModel& density,
                                 const QuadraturePlan& plan, const ParallelOptions& opts = {});
[[nodiscard]] VarianceEstimate variance(const Surrogate& s, std::size_t qoi,
                                        const DensityModel& density, const QuadraturePlan& plan,
                                        const ParallelOptions& opts = {});

/// Mean and variance of every QoI of the surrogate from one batch evaluation.
[[nodiscard]] std::vector<MomentEstimate> surrogate_moments(const Surrogate& s,
                                                            const DensityModel& density,
                                                            const QuadraturePlan& plan,
                                                            const ParallelOptions& opts = {});

struct MonteCarloEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;
};

using PointSampler = std::function<void(std::mt19937_64&, std::span<double>)>;

[[nodiscard]] MonteCarloEstimate monte_carlo_oracle(const PointFunction& f, int dim,
                                                    const PointSampler& sampler, std::size_t n,
                                                    std::uint64_t seed);

/// Plain MC with independent samples from the product density.
[[nodiscard]] MonteCarloEstimate monte_carlo_oracle(const PointFunction& f,
                                                    const std::vector<Density1D>& rho,
                                                    std::size_t n, std::uint64_t seed);

}  // namespace sgpf
