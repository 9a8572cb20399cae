#include "sgpf/nodes1d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sgpf/linalg.hpp"

namespace sgpf {

int level_to_count(NodeFamily family, int level) {
    if (level < 0) throw ContractViolation("level_to_count: negative level");
    if (level == 0) return 0;
    if (family.growth == Growth::Linear) return level;
    if (level == 1) return 1;
    if (level > 30) throw ContractViolation("level_to_count: level too large");
    return (1 << (level - 1)) + 1;
}

int count_to_level(NodeFamily family, int count) {
    if (count < 1) throw ContractViolation("count_to_level: count must be positive");
    int level = 1;
    while (level_to_count(family, level) < count) ++level;
    return level;
}

// ---------------------------------------------------------------------------
// Densities

Density1D Density1D::jacobi(double alpha, double beta) {
    if (!(alpha > -1.0) || !(beta > -1.0)) {
        throw ContractViolation("Density1D::jacobi: exponents must exceed -1");
    }
    Density1D d(alpha, beta);
    // 2^(a+b+1) B(a+1, b+1)
    d.log_norm_ = (alpha + beta + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                  std::lgamma(beta + 1.0) - std::lgamma(alpha + beta + 2.0);
    return d;
}

double Density1D::pdf(double x) const {
    if (x < -1.0 || x > 1.0) return 0.0;
    if (is_uniform()) return 0.5;
    double e = -log_norm_;
    if (alpha_ != 0.0) e += alpha_ * std::log1p(-x);
    if (beta_ != 0.0) e += beta_ * std::log1p(x);
    return std::exp(e);
}

double Density1D::sample(std::mt19937_64& rng) const {
    if (is_uniform()) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        return u(rng);
    }
    std::gamma_distribution<double> ga(beta_ + 1.0, 1.0);
    std::gamma_distribution<double> gb(alpha_ + 1.0, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return 2.0 * x / (x + y) - 1.0;
}

void Density1D::recurrence(int n, std::vector<double>& a, std::vector<double>& b) const {
    a.assign(static_cast<std::size_t>(n), 0.0);
    b.assign(static_cast<std::size_t>(n), 0.0);
    const double al = alpha_;
    const double be = beta_;
    const double ab = al + be;
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + ab;
        if (k == 0) {
            a[0] = (be - al) / (ab + 2.0);
            b[0] = 1.0;
            continue;
        }
        a[k] = (be * be - al * al) / (s * (s + 2.0));
        if (k == 1) {
            b[1] = 4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
        } else {
            b[k] = 4.0 * k * (k + al) * (k + be) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
        }
    }
}

// ---------------------------------------------------------------------------
// Node families

namespace {

std::int64_t gcd64(std::int64_t a, std::int64_t b) {
    while (b != 0) {
        const std::int64_t t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

}  // namespace

Nodes1D clenshaw_curtis_nodes(int count) {
    if (count < 1) throw ContractViolation("clenshaw_curtis_nodes: count must be positive");
    Nodes1D out;
    out.points.resize(static_cast<std::size_t>(count));
    if (count == 1) {
        out.points[0] = 0.0;
        return out;
    }
    // -cos(pi j/(m-1)) written as sin(pi (2j-m+1) / (2(m-1))): exactly odd-symmetric,
    // and the same reduced fraction always rounds to the same double.
    const int n = count - 1;
    for (int j = 0; j < count; ++j) {
        const double t = static_cast<double>(2 * j - n) / static_cast<double>(2 * n);
        out.points[static_cast<std::size_t>(j)] = std::sin(std::numbers::pi * t);
    }
    return out;
}

GaussRule gauss_nodes(int count, const Density1D& density) {
    if (count < 1) throw ContractViolation("gauss_nodes: count must be positive");
    std::vector<double> a;
    std::vector<double> b;
    density.recurrence(count, a, b);

    auto eval = [&](double x, double& p, double& dp) {
        double p_prev = 0.0;
        double dp_prev = 0.0;
        p = 1.0;
        dp = 0.0;
        for (int k = 0; k < count; ++k) {
            const double p_next = (x - a[k]) * p - (k > 0 ? b[k] * p_prev : 0.0);
            const double dp_next = p + (x - a[k]) * dp - (k > 0 ? b[k] * dp_prev : 0.0);
            p_prev = p;
            dp_prev = dp;
            p = p_next;
            dp = dp_next;
        }
    };

    constexpr double kTol = 1e-15;
    constexpr int kMaxIter = 100;
    std::vector<double> roots;
    roots.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
        bool converged = false;
        for (int it = 0; it < kMaxIter; ++it) {
            double p = 0.0;
            double dp = 0.0;
            eval(x, p, dp);
            double deflate = 0.0;
            for (double r : roots) deflate += 1.0 / (x - r);
            const double dx = p / (dp - p * deflate);
            x -= dx;
            if (std::abs(dx) <= kTol * std::max(1.0, std::abs(x))) {
                converged = true;
                break;
            }
        }
        if (!converged || !std::isfinite(x)) {
            throw std::runtime_error("gauss_nodes: root " + std::to_string(i) + " of " +
                                     std::to_string(count) + " did not converge");
        }
        roots.push_back(x);
    }
    std::sort(roots.begin(), roots.end());
    if (density.alpha() == density.beta()) {
        for (int i = 0; i < count / 2; ++i) {
            const double m = 0.5 * (roots[static_cast<std::size_t>(count - 1 - i)] -
                                    roots[static_cast<std::size_t>(i)]);
            roots[static_cast<std::size_t>(i)] = -m;
            roots[static_cast<std::size_t>(count - 1 - i)] = m;
        }
        if (count % 2 == 1) roots[static_cast<std::size_t>(count / 2)] = 0.0;
    }

    // Christoffel numbers from the orthonormal polynomials.
    GaussRule rule;
    rule.nodes.points = roots;
    rule.weights.resize(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) {
        const double x = roots[i];
        double q_prev = 0.0;
        double q = 1.0 / std::sqrt(b[0]);
        double sum = q * q;
        for (int k = 0; k + 1 < count; ++k) {
            const double q_next =
                ((x - a[k]) * q - (k > 0 ? std::sqrt(b[k]) * q_prev : 0.0)) / std::sqrt(b[k + 1]);
            q_prev = q;
            q = q_next;
            sum += q * q;
        }
        rule.weights[i] = 1.0 / sum;
    }
    return rule;
}

Nodes1D make_nodes(NodeKind kind, int count) {
    if (kind == NodeKind::ClenshawCurtis) return clenshaw_curtis_nodes(count);
    return gauss_nodes(count, Density1D::uniform()).nodes;
}

std::vector<NodeKey> node_keys(NodeKind kind, int count) {
    std::vector<NodeKey> keys(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        NodeKey k;
        if (kind == NodeKind::ClenshawCurtis) {
            if (count == 1) {
                k = {1, 2};
            } else {
                const std::int64_t g = gcd64(j, count - 1);
                k = g == 0 ? NodeKey{0, 1} : NodeKey{j / g, (count - 1) / g};
            }
        } else {
            if (count % 2 == 1 && j == count / 2) {
                k = {0, 0};
            } else {
                k = {count, j + 1};
            }
        }
        keys[static_cast<std::size_t>(j)] = k;
    }
    return keys;
}

// ---------------------------------------------------------------------------
// Interpolation

std::vector<double> barycentric_weights(const Nodes1D& nodes) {
    const std::size_t n = nodes.count();
    std::vector<double> w(n, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        double prod = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k != j) prod *= 2.0 * (nodes.points[j] - nodes.points[k]);
        }
        w[j] = 1.0 / prod;
    }
    return w;
}

void lagrange_basis(const Nodes1D& nodes, std::span<const double> bary, double x,
                    std::span<double> out) {
    const std::size_t n = nodes.count();
    if (n == 0) throw ContractViolation("lagrange_basis: empty node set");
    for (std::size_t j = 0; j < n; ++j) {
        if (x == nodes.points[j]) {
            std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), 0.0);
            out[j] = 1.0;
            return;
        }
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = bary[j] / (x - nodes.points[j]);
        denom += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
}

double interpolate_1d(const Nodes1D& nodes, std::span<const double> values, double x) {
    if (nodes.count() == 0) throw ContractViolation("interpolate_1d: empty node set");
    if (values.size() != nodes.count()) {
        throw ContractViolation("interpolate_1d: value count does not match node count");
    }
    const auto bary = barycentric_weights(nodes);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < nodes.count(); ++j) {
        const double d = x - nodes.points[j];
        if (d == 0.0) return values[j];
        const double t = bary[j] / d;
        num += t * values[j];
        den += t;
    }
    return num / den;
}

double lebesgue_constant(const Nodes1D& nodes, int samples) {
    const auto bary = barycentric_weights(nodes);
    std::vector<double> l(nodes.count());
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        const double x = -1.0 + 2.0 * s / (samples - 1);
        lagrange_basis(nodes, bary, x, l);
        double sum = 0.0;
        for (double v : l) sum += std::abs(v);
        worst = std::max(worst, sum);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Chebyshev analysis

double ChebCoeffs::evaluate(double y) const {
    if (alpha.empty()) return 0.0;
    // Clenshaw recurrence on c_0 = alpha_0, c_k = 2 alpha_k.
    double b1 = 0.0;
    double b2 = 0.0;
    for (std::size_t k = alpha.size() - 1; k >= 1; --k) {
        const double b0 = 2.0 * alpha[k] + 2.0 * y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return alpha[0] + y * b1 - b2;
}

ChebCoeffs chebyshev_coefficients(const std::function<double(double)>& u, int k_max) {
    if (k_max < 0) throw ContractViolation("chebyshev_coefficients: k_max must be nonnegative");
    const int n = std::max(64, 4 * (k_max + 1));
    std::vector<double> theta(static_cast<std::size_t>(n));
    std::vector<double> samples(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        theta[static_cast<std::size_t>(j)] = std::numbers::pi * (j + 0.5) / n;
        samples[static_cast<std::size_t>(j)] = u(std::cos(theta[static_cast<std::size_t>(j)]));
    }
    ChebCoeffs out;
    out.alpha.resize(static_cast<std::size_t>(k_max + 1));
    for (int k = 0; k <= k_max; ++k) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            s += samples[static_cast<std::size_t>(j)] * std::cos(k * theta[static_cast<std::size_t>(j)]);
        }
        out.alpha[static_cast<std::size_t>(k)] = s / n;
    }
    return out;
}

std::vector<double> quadrature_weights_1d(const Nodes1D& nodes, const Density1D& density) {
    const std::size_t n = nodes.count();
    if (n == 0) throw ContractViolation("quadrature_weights_1d: empty node set");
    const auto rule = gauss_nodes(static_cast<int>(n / 2 + 2), density);
    const auto bary = barycentric_weights(nodes);
    std::vector<double> w(n, 0.0);
    std::vector<double> l(n);
    for (std::size_t g = 0; g < rule.nodes.count(); ++g) {
        lagrange_basis(nodes, bary, rule.nodes.points[g], l);
        for (std::size_t j = 0; j < n; ++j) w[j] += rule.weights[g] * l[j];
    }
    return w;
}

}  // namespace sgpf
