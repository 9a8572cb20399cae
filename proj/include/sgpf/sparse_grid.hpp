#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgpf/nodes1d.hpp"
#include "sgpf/parallel.hpp"

namespace sgpf {

enum class RuleKind { Smolyak, TotalDegree, HyperbolicCross };

/// Level multi-index (i_1, ..., i_N), every entry >= 1.
using MultiIndex = std::vector<int>;

/// Pairs the level-constraint function g with the 1D node-count map m.
///   Smolyak:          m doubling,  g(i) = sum(i_n - 1) <= w
///   TotalDegree:      m(i) = i,    g(i) = sum(i_n - 1) <= w
///   HyperbolicCross:  m(i) = i,    g(i) = prod(i_n)    <= w + 1
struct GridRule {
    RuleKind kind = RuleKind::Smolyak;
    NodeKind nodes = NodeKind::ClenshawCurtis;

    static GridRule smolyak(NodeKind n = NodeKind::ClenshawCurtis) { return {RuleKind::Smolyak, n}; }
    static GridRule total_degree(NodeKind n = NodeKind::ClenshawCurtis) {
        return {RuleKind::TotalDegree, n};
    }
    static GridRule hyperbolic_cross(NodeKind n = NodeKind::ClenshawCurtis) {
        return {RuleKind::HyperbolicCross, n};
    }

    [[nodiscard]] NodeFamily family() const noexcept;
    [[nodiscard]] bool admissible(std::span<const int> levels, int w) const;

    friend bool operator==(const GridRule&, const GridRule&) = default;
};

[[nodiscard]] std::string to_string(RuleKind kind);
[[nodiscard]] RuleKind parse_rule_kind(const std::string& text);

struct CombinationTerm {
    MultiIndex levels;
    int coefficient = 0;
    /// Knot positions of this term's tensor grid, first dimension fastest.
    std::vector<std::size_t> knot_ids;
};

struct NodeSet {
    Nodes1D nodes;
    std::vector<double> bary;
    std::vector<NodeKey> keys;
};

class SparseGridPlan {
  public:
    SparseGridPlan() = default;

    [[nodiscard]] const GridRule& rule() const noexcept { return rule_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] int level() const noexcept { return level_; }
    [[nodiscard]] const std::vector<CombinationTerm>& terms() const noexcept { return terms_; }
    [[nodiscard]] std::size_t knot_count() const noexcept { return knots_.size() / static_cast<std::size_t>(dim_ > 0 ? dim_ : 1); }
    [[nodiscard]] std::span<const double> knot(std::size_t k) const {
        return {knots_.data() + k * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
    }
    [[nodiscard]] const std::map<std::vector<NodeKey>, std::size_t>& knot_index() const noexcept {
        return knot_index_;
    }
    [[nodiscard]] const NodeSet& node_set(int count) const;

    /// Largest per-dimension polynomial degree reproduced by the plan.
    [[nodiscard]] int max_degree() const;

    friend SparseGridPlan build_plan(const GridRule& rule, int w, int n);

  private:
    GridRule rule_;
    int dim_ = 0;
    int level_ = 0;
    std::vector<CombinationTerm> terms_;
    std::vector<double> knots_;
    std::map<std::vector<NodeKey>, std::size_t> knot_index_;
    std::map<int, NodeSet> node_sets_;
};

/// All multi-indices with g(i) <= w, lexicographic.
[[nodiscard]] std::vector<MultiIndex> admissible_indices(const GridRule& rule, int w, int n);

/// Inclusion-exclusion coefficients c(i) = sum_{j in {0,1}^N, g(i+j)<=w} (-1)^|j|;
/// zero coefficients are dropped.
[[nodiscard]] std::vector<std::pair<MultiIndex, int>> combination_coefficients(const GridRule& rule,
                                                                               int w, int n);

[[nodiscard]] SparseGridPlan build_plan(const GridRule& rule, int w, int n);

/// Degree multi-indices of the polynomial space the plan reproduces exactly.
[[nodiscard]] std::vector<std::vector<int>> polynomial_space(const GridRule& rule, int w, int n);

/// Sampled quantity-of-interest values on the knots of a plan.
class Surrogate {
  public:
    Surrogate(std::shared_ptr<const SparseGridPlan> plan, std::vector<std::vector<double>> values);

    [[nodiscard]] const SparseGridPlan& plan() const noexcept { return *plan_; }
    [[nodiscard]] std::shared_ptr<const SparseGridPlan> plan_ptr() const noexcept { return plan_; }
    [[nodiscard]] std::size_t qoi_count() const noexcept { return values_.size(); }
    /// values()[qoi][knot]
    [[nodiscard]] const std::vector<std::vector<double>>& values() const noexcept { return values_; }

  private:
    std::shared_ptr<const SparseGridPlan> plan_;
    std::vector<std::vector<double>> values_;
};

using KnotFunction = std::function<std::vector<double>(std::span<const double>)>;

/// Raised when the sampled function fails at a knot; carries the knot.
class KnotEvaluationError : public std::runtime_error {
  public:
    KnotEvaluationError(std::size_t knot, std::vector<double> point, const std::string& what);
    [[nodiscard]] std::size_t knot() const noexcept { return knot_; }
    [[nodiscard]] const std::vector<double>& point() const noexcept { return point_; }

  private:
    std::size_t knot_;
    std::vector<double> point_;
};

/// Evaluates `f` once per knot. With Execution::Parallel the knots are
/// distributed over OpenMP threads; `f` must then be safe to call concurrently.
/// If several knots fail, the lowest knot index is reported.
[[nodiscard]] Surrogate build_surrogate(std::shared_ptr<const SparseGridPlan> plan,
                                        const KnotFunction& f, const ParallelOptions& opts = {});

[[nodiscard]] std::vector<double> evaluate_surrogate(const Surrogate& s, std::span<const double> q);

/// Evaluates the surrogate at every row of `points` (row-major, dim columns).
/// Result is out[point * qoi_count + qoi].
[[nodiscard]] std::vector<double> evaluate_surrogate_batch(const Surrogate& s,
                                                           std::span<const double> points,
                                                           const ParallelOptions& opts = {});

// Text serialization used for caching between runs.
void write_plan(std::ostream& os, const SparseGridPlan& plan);
void write_surrogate(std::ostream& os, const Surrogate& s);
/// Reads a surrogate and rebuilds its plan; throws std::runtime_error on
/// malformed input or if the stored knots disagree with the rebuilt plan.
[[nodiscard]] Surrogate read_surrogate(std::istream& is);

}  // namespace sgpf
