#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace sgpf {

enum class NodeKind { ClenshawCurtis, GaussLegendre };

/// How the number of 1D nodes grows with the level: Doubling is the classic
/// Smolyak m(1)=1, m(i)=2^(i-1)+1; Linear is m(i)=i. Both give m(0)=0.
enum class Growth { Doubling, Linear };

struct NodeFamily {
    NodeKind kind = NodeKind::ClenshawCurtis;
    Growth growth = Growth::Doubling;

    friend bool operator==(const NodeFamily&, const NodeFamily&) = default;
};

[[nodiscard]] int level_to_count(NodeFamily family, int level);

/// Smallest level whose node count is at least `count` (count >= 1).
[[nodiscard]] int count_to_level(NodeFamily family, int count);

/// Exact identity of a 1D node, independent of floating point. Clenshaw-Curtis
/// nodes map to the reduced fraction (j-1)/(m-1) of pi in -cos(pi t); Gauss
/// nodes map to (count, index) except the shared midpoint of odd rules.
struct NodeKey {
    std::int64_t num = 0;
    std::int64_t den = 1;
    friend auto operator<=>(const NodeKey&, const NodeKey&) = default;
};

struct Nodes1D {
    std::vector<double> points;

    [[nodiscard]] std::size_t count() const noexcept { return points.size(); }
};

/// A product-form 1D density on [-1,1] proportional to (1-x)^alpha (1+x)^beta,
/// normalised to integrate to one. alpha = beta = 0 is the uniform density.
class Density1D {
  public:
    static Density1D uniform() { return Density1D(0.0, 0.0); }
    static Density1D jacobi(double alpha, double beta);

    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] bool is_uniform() const noexcept { return alpha_ == 0.0 && beta_ == 0.0; }

    [[nodiscard]] double pdf(double x) const;
    [[nodiscard]] double sample(std::mt19937_64& rng) const;

    /// Monic three-term recurrence p_{k+1} = (x - a_k) p_k - b_k p_{k-1}
    /// for k = 0..n-1; b_0 is the total mass (one).
    void recurrence(int n, std::vector<double>& a, std::vector<double>& b) const;

    friend bool operator==(const Density1D&, const Density1D&) = default;

  private:
    Density1D(double alpha, double beta) : alpha_(alpha), beta_(beta) {}
    double alpha_;
    double beta_;
    double log_norm_ = 0.0;
};

struct GaussRule {
    Nodes1D nodes;
    std::vector<double> weights;
};

/// Clenshaw-Curtis (Chebyshev extrema) nodes in ascending order; a single
/// node is placed at 0.
[[nodiscard]] Nodes1D clenshaw_curtis_nodes(int count);

/// Gaussian nodes and weights for `density`, found by Newton iteration on the
/// three-term recurrence. Throws std::runtime_error if a root fails to converge.
[[nodiscard]] GaussRule gauss_nodes(int count, const Density1D& density);

[[nodiscard]] Nodes1D make_nodes(NodeKind kind, int count);
[[nodiscard]] std::vector<NodeKey> node_keys(NodeKind kind, int count);

/// Barycentric weights, scaled so that they stay O(1) on [-1,1].
[[nodiscard]] std::vector<double> barycentric_weights(const Nodes1D& nodes);

/// Writes l_j(x) for every node into `out` (size = node count).
void lagrange_basis(const Nodes1D& nodes, std::span<const double> bary, double x,
                    std::span<double> out);

/// Barycentric (second form) Lagrange interpolation.
[[nodiscard]] double interpolate_1d(const Nodes1D& nodes, std::span<const double> values,
                                    double x);

/// Estimated Lebesgue constant: max over `samples` equispaced points of sum |l_j|.
[[nodiscard]] double lebesgue_constant(const Nodes1D& nodes, int samples = 2001);

struct ChebCoeffs {
    /// u(y) = alpha[0] + 2 * sum_{k>=1} alpha[k] T_k(y)
    std::vector<double> alpha;

    [[nodiscard]] double evaluate(double y) const;
};

[[nodiscard]] ChebCoeffs chebyshev_coefficients(const std::function<double(double)>& u,
                                                int k_max);

/// w_j = integral of l_j(q) * density(q) over [-1,1].
[[nodiscard]] std::vector<double> quadrature_weights_1d(const Nodes1D& nodes,
                                                        const Density1D& density);

}  // namespace sgpf
