#include "sgpf/sparse_grid.hpp"

#include <algorithm>
#include <istream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "sgpf/linalg.hpp"

namespace sgpf {

NodeFamily GridRule::family() const noexcept {
    return {nodes, kind == RuleKind::Smolyak ? Growth::Doubling : Growth::Linear};
}

bool GridRule::admissible(std::span<const int> levels, int w) const {
    if (kind == RuleKind::HyperbolicCross) {
        long long prod = 1;
        for (int i : levels) {
            prod *= i;
            if (prod > static_cast<long long>(w) + 1) return false;
        }
        return true;
    }
    long long sum = 0;
    for (int i : levels) sum += i - 1;
    return sum <= w;
}

std::string to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::Smolyak: return "smolyak";
        case RuleKind::TotalDegree: return "td";
        case RuleKind::HyperbolicCross: return "hc";
    }
    return "unknown";
}

RuleKind parse_rule_kind(const std::string& text) {
    if (text == "smolyak") return RuleKind::Smolyak;
    if (text == "td") return RuleKind::TotalDegree;
    if (text == "hc") return RuleKind::HyperbolicCross;
    throw ContractViolation("unknown grid rule '" + text + "' (expected smolyak, td or hc)");
}

namespace {

void enumerate_admissible(const GridRule& rule, int w, std::size_t d, MultiIndex& current,
                          std::vector<MultiIndex>& out) {
    if (d == current.size()) {
        out.push_back(current);
        return;
    }
    for (int i = 1;; ++i) {
        current[d] = i;
        if (!rule.admissible(current, w)) break;
        enumerate_admissible(rule, w, d + 1, current, out);
    }
    current[d] = 1;
}

void check_args(int w, int n) {
    if (n < 1) throw ContractViolation("sparse grid: dimension must be >= 1");
    if (w < 0) throw ContractViolation("sparse grid: level must be >= 0");
}

}  // namespace

std::vector<MultiIndex> admissible_indices(const GridRule& rule, int w, int n) {
    check_args(w, n);
    std::vector<MultiIndex> out;
    MultiIndex current(static_cast<std::size_t>(n), 1);
    enumerate_admissible(rule, w, 0, current, out);
    return out;
}

std::vector<std::pair<MultiIndex, int>> combination_coefficients(const GridRule& rule, int w,
                                                                 int n) {
    const auto indices = admissible_indices(rule, w, n);
    std::vector<std::pair<MultiIndex, int>> out;
    MultiIndex shifted(static_cast<std::size_t>(n));
    const unsigned long corners = 1UL << n;
    for (const auto& idx : indices) {
        int c = 0;
        for (unsigned long mask = 0; mask < corners; ++mask) {
            int ones = 0;
            for (int d = 0; d < n; ++d) {
                const int bit = static_cast<int>((mask >> d) & 1UL);
                shifted[static_cast<std::size_t>(d)] = idx[static_cast<std::size_t>(d)] + bit;
                ones += bit;
            }
            if (rule.admissible(shifted, w)) c += (ones % 2 == 0) ? 1 : -1;
        }
        if (c != 0) out.emplace_back(idx, c);
    }
    return out;
}

const NodeSet& SparseGridPlan::node_set(int count) const {
    auto it = node_sets_.find(count);
    if (it == node_sets_.end()) throw ContractViolation("node_set: count not used by plan");
    return it->second;
}

int SparseGridPlan::max_degree() const {
    int best = 0;
    for (const auto& t : terms_) {
        for (int i : t.levels) best = std::max(best, level_to_count(rule_.family(), i) - 1);
    }
    return best;
}

SparseGridPlan build_plan(const GridRule& rule, int w, int n) {
    SparseGridPlan plan;
    plan.rule_ = rule;
    plan.dim_ = n;
    plan.level_ = w;
    const NodeFamily family = rule.family();
    const auto dn = static_cast<std::size_t>(n);

    for (auto& [levels, c] : combination_coefficients(rule, w, n)) {
        CombinationTerm t;
        t.levels = levels;
        t.coefficient = c;
        plan.terms_.push_back(std::move(t));
    }

    for (const auto& t : plan.terms_) {
        for (int i : t.levels) {
            const int m = level_to_count(family, i);
            if (!plan.node_sets_.contains(m)) {
                NodeSet ns;
                ns.nodes = make_nodes(rule.nodes, m);
                ns.bary = barycentric_weights(ns.nodes);
                ns.keys = node_keys(rule.nodes, m);
                plan.node_sets_.emplace(m, std::move(ns));
            }
        }
    }

    // Union of the tensor grids, identified by exact node keys.
    std::map<std::vector<NodeKey>, std::vector<double>> unique;
    std::vector<std::vector<std::vector<NodeKey>>> term_keys(plan.terms_.size());
    std::vector<NodeKey> key(dn);
    std::vector<double> coords(dn);
    std::vector<int> counter(dn);
    for (std::size_t ti = 0; ti < plan.terms_.size(); ++ti) {
        const auto& t = plan.terms_[ti];
        std::vector<const NodeSet*> sets(dn);
        std::size_t total = 1;
        for (std::size_t d = 0; d < dn; ++d) {
            sets[d] = &plan.node_sets_.at(level_to_count(family, t.levels[d]));
            total *= sets[d]->nodes.count();
        }
        std::fill(counter.begin(), counter.end(), 0);
        term_keys[ti].reserve(total);
        for (std::size_t p = 0; p < total; ++p) {
            for (std::size_t d = 0; d < dn; ++d) {
                key[d] = sets[d]->keys[static_cast<std::size_t>(counter[d])];
                coords[d] = sets[d]->nodes.points[static_cast<std::size_t>(counter[d])];
            }
            term_keys[ti].push_back(key);
            unique.try_emplace(key, coords);
            for (std::size_t d = 0; d < dn; ++d) {
                if (++counter[d] < static_cast<int>(sets[d]->nodes.count())) break;
                counter[d] = 0;
            }
        }
    }

    std::vector<std::pair<std::vector<double>, std::vector<NodeKey>>> ordered;
    ordered.reserve(unique.size());
    for (auto& [k, c] : unique) ordered.emplace_back(c, k);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    plan.knots_.reserve(ordered.size() * dn);
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        plan.knots_.insert(plan.knots_.end(), ordered[k].first.begin(), ordered[k].first.end());
        plan.knot_index_.emplace(ordered[k].second, k);
    }
    for (std::size_t ti = 0; ti < plan.terms_.size(); ++ti) {
        auto& ids = plan.terms_[ti].knot_ids;
        ids.reserve(term_keys[ti].size());
        for (const auto& k : term_keys[ti]) ids.push_back(plan.knot_index_.at(k));
    }
    return plan;
}

std::vector<std::vector<int>> polynomial_space(const GridRule& rule, int w, int n) {
    check_args(w, n);
    const NodeFamily family = rule.family();
    std::vector<std::vector<int>> out;
    std::vector<int> degrees(static_cast<std::size_t>(n), 0);
    std::vector<int> levels(static_cast<std::size_t>(n), 1);
    // Depth-first over degrees; admissibility is monotone in each degree.
    std::function<void(std::size_t)> rec = [&](std::size_t d) {
        if (d == degrees.size()) {
            out.push_back(degrees);
            return;
        }
        for (int p = 0;; ++p) {
            degrees[d] = p;
            levels[d] = count_to_level(family, p + 1);
            if (!rule.admissible(levels, w)) break;
            rec(d + 1);
        }
        degrees[d] = 0;
        levels[d] = 1;
    };
    rec(0);
    return out;
}

// ---------------------------------------------------------------------------
// Surrogates

Surrogate::Surrogate(std::shared_ptr<const SparseGridPlan> plan,
                     std::vector<std::vector<double>> values)
    : plan_(std::move(plan)), values_(std::move(values)) {
    if (!plan_) throw ContractViolation("Surrogate: null plan");
    for (const auto& v : values_) {
        if (v.size() != plan_->knot_count()) {
            throw ContractViolation("Surrogate: value count does not match knot count");
        }
    }
}

KnotEvaluationError::KnotEvaluationError(std::size_t knot, std::vector<double> point,
                                         const std::string& what)
    : std::runtime_error([&] {
          std::ostringstream os;
          os << "evaluation failed at knot " << knot << " q=(";
          os << std::setprecision(17);
          for (std::size_t i = 0; i < point.size(); ++i) os << (i ? ", " : "") << point[i];
          os << "): " << what;
          return os.str();
      }()),
      knot_(knot),
      point_(std::move(point)) {}

Surrogate build_surrogate(std::shared_ptr<const SparseGridPlan> plan, const KnotFunction& f,
                          const ParallelOptions& opts) {
    const std::size_t k_total = plan->knot_count();
    std::vector<std::vector<double>> per_knot(k_total);
    constexpr std::size_t kNoFailure = std::numeric_limits<std::size_t>::max();
    std::size_t failed = kNoFailure;
    std::string failure;

    auto eval_one = [&](std::size_t k) {
        try {
            const auto q = plan->knot(k);
            per_knot[k] = f(q);
        } catch (const std::exception& e) {
#pragma omp critical(sgpf_knot_failure)
            {
                if (k < failed) {
                    failed = k;
                    failure = e.what();
                }
            }
        }
    };

    if (opts.execution == Execution::Serial) {
        for (std::size_t k = 0; k < k_total; ++k) eval_one(k);
    } else {
        const int workers = effective_workers(opts);
        const auto n = static_cast<long long>(k_total);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
        for (long long k = 0; k < n; ++k) eval_one(static_cast<std::size_t>(k));
    }

    if (failed != kNoFailure) {
        const auto q = plan->knot(failed);
        throw KnotEvaluationError(failed, {q.begin(), q.end()}, failure);
    }

    const std::size_t n_qoi = k_total > 0 ? per_knot[0].size() : 0;
    std::vector<std::vector<double>> values(n_qoi, std::vector<double>(k_total));
    for (std::size_t k = 0; k < k_total; ++k) {
        if (per_knot[k].size() != n_qoi) {
            const auto q = plan->knot(k);
            throw KnotEvaluationError(k, {q.begin(), q.end()}, "inconsistent QoI vector length");
        }
        for (std::size_t j = 0; j < n_qoi; ++j) values[j][k] = per_knot[k][j];
    }
    return Surrogate(std::move(plan), std::move(values));
}

namespace {

/// Scratch space reused across evaluations on one thread.
struct EvalWorkspace {
    // basis[d][level] -> l_j(q_d) for the node set of that level
    std::vector<std::vector<std::vector<double>>> basis;
    std::vector<std::vector<char>> ready;
    std::vector<int> counter;
};

void evaluate_into(const Surrogate& s, std::span<const double> q, EvalWorkspace& ws,
                   std::span<double> out) {
    const auto& plan = s.plan();
    const auto dn = static_cast<std::size_t>(plan.dim());
    if (q.size() != dn) throw ContractViolation("evaluate_surrogate: point dimension mismatch");
    const NodeFamily family = plan.rule().family();
    const auto max_level = static_cast<std::size_t>(plan.level() + 2);
    ws.basis.resize(dn);
    ws.ready.resize(dn);
    for (std::size_t d = 0; d < dn; ++d) {
        if (ws.basis[d].size() < max_level) ws.basis[d].resize(max_level);
        ws.ready[d].assign(std::max(ws.ready[d].size(), max_level), 0);
    }
    ws.counter.assign(dn, 0);
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n_qoi = s.qoi_count();
    std::vector<const std::vector<double>*> lb(dn);
    std::vector<double> term_acc(n_qoi);

    for (const auto& t : plan.terms()) {
        for (std::size_t d = 0; d < dn; ++d) {
            const auto lv = static_cast<std::size_t>(t.levels[d]);
            if (lv >= ws.basis[d].size()) {
                ws.basis[d].resize(lv + 1);
                ws.ready[d].resize(lv + 1, 0);
            }
            auto& slot = ws.basis[d][lv];
            if (!ws.ready[d][lv]) {
                const auto& ns = plan.node_set(level_to_count(family, t.levels[d]));
                slot.resize(ns.nodes.count());
                lagrange_basis(ns.nodes, ns.bary, q[d], slot);
                ws.ready[d][lv] = 1;
            }
            lb[d] = &slot;
        }
        std::fill(term_acc.begin(), term_acc.end(), 0.0);
        std::fill(ws.counter.begin(), ws.counter.end(), 0);
        // dimension 0 runs fastest in knot_ids; the other dimensions
        // contribute one product per contiguous run
        const auto& l0 = *lb[0];
        const std::size_t m0 = l0.size();
        for (std::size_t base = 0; base < t.knot_ids.size(); base += m0) {
            double wo = 1.0;
            for (std::size_t d = 1; d < dn; ++d) wo *= (*lb[d])[static_cast<std::size_t>(ws.counter[d])];
            for (std::size_t j = 0; j < n_qoi; ++j) {
                const auto& vals = s.values()[j];
                double run = 0.0;
                for (std::size_t i = 0; i < m0; ++i) run += l0[i] * vals[t.knot_ids[base + i]];
                term_acc[j] += wo * run;
            }
            for (std::size_t d = 1; d < dn; ++d) {
                if (++ws.counter[d] < static_cast<int>(lb[d]->size())) break;
                ws.counter[d] = 0;
            }
        }
        for (std::size_t j = 0; j < n_qoi; ++j) out[j] += t.coefficient * term_acc[j];
    }
}

}  // namespace

std::vector<double> evaluate_surrogate(const Surrogate& s, std::span<const double> q) {
    EvalWorkspace ws;
    std::vector<double> out(s.qoi_count());
    evaluate_into(s, q, ws, out);
    return out;
}

std::vector<double> evaluate_surrogate_batch(const Surrogate& s, std::span<const double> points,
                                             const ParallelOptions& opts) {
    const auto dn = static_cast<std::size_t>(s.plan().dim());
    if (points.size() % dn != 0) throw ContractViolation("evaluate_surrogate_batch: ragged points");
    const std::size_t n_pts = points.size() / dn;
    const std::size_t n_qoi = s.qoi_count();
    std::vector<double> out(n_pts * n_qoi);
    if (opts.execution == Execution::Serial) {
        EvalWorkspace ws;
        for (std::size_t p = 0; p < n_pts; ++p) {
            evaluate_into(s, points.subspan(p * dn, dn), ws,
                          std::span<double>(out).subspan(p * n_qoi, n_qoi));
        }
        return out;
    }
    const int workers = effective_workers(opts);
    const auto n = static_cast<long long>(n_pts);
#pragma omp parallel num_threads(workers)
    {
        EvalWorkspace ws;
#pragma omp for schedule(static)
        for (long long p = 0; p < n; ++p) {
            const auto pi = static_cast<std::size_t>(p);
            evaluate_into(s, points.subspan(pi * dn, dn), ws,
                          std::span<double>(out).subspan(pi * n_qoi, n_qoi));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string node_kind_name(NodeKind k) {
    return k == NodeKind::ClenshawCurtis ? "clenshaw-curtis" : "gauss-legendre";
}

NodeKind parse_node_kind(const std::string& s) {
    if (s == "clenshaw-curtis") return NodeKind::ClenshawCurtis;
    if (s == "gauss-legendre") return NodeKind::GaussLegendre;
    throw std::runtime_error("unknown node kind '" + s + "'");
}

void write_header(std::ostream& os, const SparseGridPlan& plan) {
    os << "rule " << to_string(plan.rule().kind) << '\n';
    os << "nodes " << node_kind_name(plan.rule().nodes) << '\n';
    os << "dim " << plan.dim() << '\n';
    os << "level " << plan.level() << '\n';
}

void write_terms(std::ostream& os, const SparseGridPlan& plan) {
    os << "terms " << plan.terms().size() << '\n';
    for (const auto& t : plan.terms()) {
        os << t.coefficient;
        for (int i : t.levels) os << ' ' << i;
        os << '\n';
    }
}

template <typename T>
T expect_field(std::istream& is, const std::string& name) {
    std::string tag;
    T value{};
    if (!(is >> tag) || tag != name || !(is >> value)) {
        throw std::runtime_error("surrogate file: expected field '" + name + "'");
    }
    return value;
}

}  // namespace

void write_plan(std::ostream& os, const SparseGridPlan& plan) {
    os << "# sgpf-plan v1\n";
    write_header(os, plan);
    write_terms(os, plan);
    os << "knots " << plan.knot_count() << '\n';
    os << std::setprecision(17);
    for (std::size_t k = 0; k < plan.knot_count(); ++k) {
        const auto q = plan.knot(k);
        for (std::size_t d = 0; d < q.size(); ++d) os << (d ? " " : "") << q[d];
        os << '\n';
    }
}

void write_surrogate(std::ostream& os, const Surrogate& s) {
    const auto& plan = s.plan();
    os << "# sgpf-surrogate v1\n";
    write_header(os, plan);
    os << "qoi " << s.qoi_count() << '\n';
    write_terms(os, plan);
    os << "knots " << plan.knot_count() << '\n';
    os << std::setprecision(17);
    for (std::size_t k = 0; k < plan.knot_count(); ++k) {
        const auto q = plan.knot(k);
        for (std::size_t d = 0; d < q.size(); ++d) os << (d ? " " : "") << q[d];
        for (std::size_t j = 0; j < s.qoi_count(); ++j) os << ' ' << s.values()[j][k];
        os << '\n';
    }
}

Surrogate read_surrogate(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "# sgpf-surrogate v1") {
        throw std::runtime_error("surrogate file: missing '# sgpf-surrogate v1' header");
    }
    GridRule rule;
    rule.kind = parse_rule_kind(expect_field<std::string>(is, "rule"));
    rule.nodes = parse_node_kind(expect_field<std::string>(is, "nodes"));
    const int dim = expect_field<int>(is, "dim");
    const int level = expect_field<int>(is, "level");
    const auto n_qoi = expect_field<std::size_t>(is, "qoi");
    auto plan = std::make_shared<SparseGridPlan>(build_plan(rule, level, dim));

    const auto n_terms = expect_field<std::size_t>(is, "terms");
    if (n_terms != plan->terms().size()) throw std::runtime_error("surrogate file: term count mismatch");
    for (std::size_t t = 0; t < n_terms; ++t) {
        int c = 0;
        is >> c;
        MultiIndex levels(static_cast<std::size_t>(dim));
        for (auto& l : levels) is >> l;
        if (!is || c != plan->terms()[t].coefficient || levels != plan->terms()[t].levels) {
            throw std::runtime_error("surrogate file: term " + std::to_string(t) + " mismatch");
        }
    }
    const auto n_knots = expect_field<std::size_t>(is, "knots");
    if (n_knots != plan->knot_count()) throw std::runtime_error("surrogate file: knot count mismatch");
    std::vector<std::vector<double>> values(n_qoi, std::vector<double>(n_knots));
    for (std::size_t k = 0; k < n_knots; ++k) {
        const auto q = plan->knot(k);
        for (std::size_t d = 0; d < q.size(); ++d) {
            double x = 0.0;
            if (!(is >> x)) throw std::runtime_error("surrogate file: truncated knot table");
            if (x != q[d]) {
                throw std::runtime_error("surrogate file: knot " + std::to_string(k) +
                                         " does not match the rebuilt plan");
            }
        }
        for (std::size_t j = 0; j < n_qoi; ++j) {
            if (!(is >> values[j][k])) throw std::runtime_error("surrogate file: truncated values");
        }
    }
    return Surrogate(std::move(plan), std::move(values));
}

}  // namespace sgpf
