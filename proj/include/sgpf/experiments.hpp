#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgpf/analyticity.hpp"
#include "sgpf/moments.hpp"
#include "sgpf/newton.hpp"
#include "sgpf/powerflow.hpp"
#include "sgpf/sparse_grid.hpp"

namespace sgpf {

/// Raised for malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Settings shared by the uq-* and certify commands. See README for the
/// config-file keys.
struct ExperimentConfig {
    std::string case_spec = "bundled:case39";
    RuleKind rule = RuleKind::Smolyak;
    std::vector<int> levels = {1, 2, 3, 4};
    int reference_level = 5;
    QoiSpec qoi{QoiSpec::Kind::Voltage, 22};

    std::vector<int> load_buses;
    double load_coeff = 0.5;
    /// Separate parameters for P and Q of each load bus.
    bool split_pq = false;
    std::vector<int> branches;
    double admittance_coeff = 0.5;
    /// Requested parameter dimension; 0 = derived from the lists above.
    int dims = 0;

    std::uint64_t seed = 1;
    int workers = 0;
    double tol = 1e-10;
    int max_iter = 30;
    StartKind start = StartKind::FromCase;
    std::string out;
    std::string cache_dir;

    double kappa_e_factor = 2.0;
    double delta_e_factor = 3.0;
    double sigma_cap = 4.0;
    std::size_t mc_samples = 0;
    /// When false, wall_ms is written as 0 so reruns are byte-identical.
    bool timing = true;
};

/// Flat `key = value` lines; `#` comments; lists as `[a, b, c]`.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text,
                                            ExperimentConfig base = ExperimentConfig{});
[[nodiscard]] ExperimentConfig load_config(const std::string& path,
                                           ExperimentConfig base = ExperimentConfig{});
void validate_config(const ExperimentConfig& c);

/// Builds the perturbation model. When `dims` is set and no buses or branches
/// are listed, the first `dims` PQ buses with nonzero load are used.
[[nodiscard]] StochasticPerturbation make_perturbation(const PowerNetwork& net,
                                                       const ExperimentConfig& c);

/// Solves the perturbed power flow at q and returns the QoI; throws
/// DomainError if Newton does not converge.
class KnotSolver {
  public:
    KnotSolver(const PowerNetwork& net, StochasticPerturbation pert, QoiSpec qoi,
               NewtonOptions opts, StartKind start);
    [[nodiscard]] std::vector<double> operator()(std::span<const double> q) const;

  private:
    const PowerNetwork* net_;
    StochasticPerturbation pert_;
    QoiSpec qoi_;
    NewtonOptions opts_;
    NewtonProblem problem_;
    Vector x0_;
};

/// Builds surrogates for several levels, reusing knot values shared between
/// nested grids and optionally caching surrogates on disk.
class SurrogateBuilder {
  public:
    SurrogateBuilder(KnotFunction f, GridRule rule, int n, ParallelOptions opts,
                     std::string cache_dir = {}, std::string cache_tag = {});

    [[nodiscard]] Surrogate build(int w);
    /// Knot evaluations actually performed so far.
    [[nodiscard]] std::size_t evaluations() const noexcept { return evaluations_; }

  private:
    KnotFunction f_;
    GridRule rule_;
    int n_;
    ParallelOptions opts_;
    std::string cache_dir_;
    std::string cache_tag_;
    std::map<std::vector<double>, std::vector<double>> memo_;
    std::size_t evaluations_ = 0;
};

struct UqRow {
    int w = 0;
    std::size_t knots = 0;
    double mean = 0.0;
    double var = 0.0;
    double err_mean = 0.0;
    double err_var = 0.0;
    double wall_ms = 0.0;
};

struct UqStudy {
    std::vector<UqRow> rows;
    UqRow reference;
};

/// Moments of QoI 0 of the surrogate under the uniform density on [-1,1]^N.
[[nodiscard]] MomentEstimate uniform_moments(const Surrogate& s, const ParallelOptions& opts);

/// Rows for every level in c.levels plus the reference level.
[[nodiscard]] UqStudy run_uq_convergence(const ExperimentConfig& c);

void write_uq_csv(std::ostream& os, const UqStudy& study);

inline constexpr const char* kCsvSchema = "# sgpf-uq-convergence v1";

}  // namespace sgpf
