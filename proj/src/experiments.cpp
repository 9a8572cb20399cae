#include "sgpf/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sgpf/case_io.hpp"

namespace sgpf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& v) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
        throw ConfigError("config: '" + key + "' must be a list like [1, 2]");
    }
    std::vector<std::string> out;
    std::stringstream ss(v.substr(1, v.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long long r = 0;
    try {
        r = std::stoll(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return r;
}

double to_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double r = 0;
    try {
        r = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return r;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + key + "' expects true or false");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split_list(key, v)) out.push_back(static_cast<int>(to_int(key, item)));
    return out;
}

QoiSpec parse_qoi(const std::string& v) {
    // V22, theta22, or voltage:22 / angle:22
    std::string kind;
    std::string bus;
    if (const auto colon = v.find(':'); colon != std::string::npos) {
        kind = v.substr(0, colon);
        bus = v.substr(colon + 1);
    } else {
        const auto digit = v.find_first_of("0123456789");
        if (digit == std::string::npos) throw ConfigError("config: bad qoi '" + v + "'");
        kind = v.substr(0, digit);
        bus = v.substr(digit);
    }
    QoiSpec q;
    if (kind == "V" || kind == "voltage") {
        q.kind = QoiSpec::Kind::Voltage;
    } else if (kind == "theta" || kind == "angle") {
        q.kind = QoiSpec::Kind::Angle;
    } else {
        throw ConfigError("config: bad qoi '" + v + "'");
    }
    q.bus = static_cast<int>(to_int("qoi", bus));
    return q;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, ExperimentConfig c) {
    std::stringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(n) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        try {
            if (key == "case") c.case_spec = v;
            else if (key == "rule") c.rule = parse_rule_kind(v);
            else if (key == "levels") c.levels = to_int_list(key, v);
            else if (key == "ref_level") c.reference_level = static_cast<int>(to_int(key, v));
            else if (key == "qoi") c.qoi = parse_qoi(v);
            else if (key == "load_buses") c.load_buses = to_int_list(key, v);
            else if (key == "load_coeff") c.load_coeff = to_real(key, v);
            else if (key == "split_pq") c.split_pq = to_bool(key, v);
            else if (key == "branches") c.branches = to_int_list(key, v);
            else if (key == "admittance_coeff") c.admittance_coeff = to_real(key, v);
            else if (key == "dims") c.dims = static_cast<int>(to_int(key, v));
            else if (key == "seed") c.seed = static_cast<std::uint64_t>(to_int(key, v));
            else if (key == "workers") c.workers = static_cast<int>(to_int(key, v));
            else if (key == "tol") c.tol = to_real(key, v);
            else if (key == "max_iter") c.max_iter = static_cast<int>(to_int(key, v));
            else if (key == "start") {
                if (v == "flat") c.start = StartKind::Flat;
                else if (v == "case") c.start = StartKind::FromCase;
                else throw ConfigError("config: start must be 'flat' or 'case'");
            }
            else if (key == "out") c.out = v;
            else if (key == "cache") c.cache_dir = v;
            else if (key == "kappa_e_factor") c.kappa_e_factor = to_real(key, v);
            else if (key == "delta_e_factor") c.delta_e_factor = to_real(key, v);
            else if (key == "sigma_cap") c.sigma_cap = to_real(key, v);
            else if (key == "mc_samples") c.mc_samples = static_cast<std::size_t>(to_int(key, v));
            else if (key == "timing") c.timing = to_bool(key, v);
            else throw ConfigError("config: unknown key '" + key + "'");
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
        }
    }
    return c;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

void validate_config(const ExperimentConfig& c) {
    if (c.levels.empty()) throw ConfigError("config: levels is empty");
    for (int w : c.levels) {
        if (w < 0) throw ConfigError("config: levels must be nonnegative");
        if (w >= c.reference_level) throw ConfigError("config: every level must be below ref_level");
    }
    if (!(c.tol > 0.0)) throw ConfigError("config: tol must be positive");
    if (c.max_iter < 1) throw ConfigError("config: max_iter must be positive");
    if (c.dims < 0) throw ConfigError("config: dims must be nonnegative");
    if (c.workers < 0) throw ConfigError("config: workers must be nonnegative");
}

StochasticPerturbation make_perturbation(const PowerNetwork& net, const ExperimentConfig& c) {
    StochasticPerturbation p;
    std::vector<int> buses = c.load_buses;
    if (buses.empty() && c.branches.empty() && c.dims > 0) {
        const int per_bus = c.split_pq ? 2 : 1;
        for (const auto& b : net.buses()) {
            if (static_cast<int>(buses.size()) * per_bus >= c.dims) break;
            if (b.kind == BusKind::PQ && (b.p_load != 0.0 || b.q_load != 0.0)) buses.push_back(b.id);
        }
    }
    int d = 0;
    for (int id : buses) {
        LoadTerm t{id, c.load_coeff, c.load_coeff, {d}};
        if (c.split_pq) t.dims.push_back(d + 1);
        d += static_cast<int>(t.dims.size());
        p.loads.push_back(t);
    }
    for (int br : c.branches) {
        p.admittances.push_back({br, c.admittance_coeff, c.admittance_coeff, {d}});
        ++d;
    }
    p.n = d;
    if (c.dims > 0 && c.dims != d) {
        throw ConfigError("config: dims = " + std::to_string(c.dims) + " but the perturbation uses " +
                          std::to_string(d) + " parameters");
    }
    if (d == 0) throw ConfigError("config: the perturbation has no parameters");
    p.validate(net);
    return p;
}

KnotSolver::KnotSolver(const PowerNetwork& net, StochasticPerturbation pert, QoiSpec qoi,
                       NewtonOptions opts, StartKind start)
    : net_(&net), pert_(std::move(pert)), qoi_(qoi), opts_(opts),
      problem_(power_flow_problem(net, pert_)), x0_(start_state(net, start)) {
    (void)net.index_of(qoi.bus);
}

std::vector<double> KnotSolver::operator()(std::span<const double> q) const {
    const Vector params = Eigen::Map<const Vector>(q.data(), static_cast<Eigen::Index>(q.size()));
    const auto trace = solve(problem_, x0_, params, opts_);
    if (!trace.converged) {
        throw DomainError(std::string("power flow did not converge (") + to_string(trace.status) +
                          ", residual " + std::to_string(trace.residual_norms.back()) + ")");
    }
    return {quantity_of_interest(*net_, trace.solution(), qoi_)};
}

SurrogateBuilder::SurrogateBuilder(KnotFunction f, GridRule rule, int n, ParallelOptions opts,
                                   std::string cache_dir, std::string cache_tag)
    : f_(std::move(f)), rule_(rule), n_(n), opts_(opts), cache_dir_(std::move(cache_dir)),
      cache_tag_(std::move(cache_tag)) {}

Surrogate SurrogateBuilder::build(int w) {
    auto plan = std::make_shared<const SparseGridPlan>(build_plan(rule_, w, n_));
    std::filesystem::path cache_file;
    if (!cache_dir_.empty()) {
        cache_file = std::filesystem::path(cache_dir_) / (cache_tag_ + "-w" + std::to_string(w) + ".sgs");
        std::ifstream in(cache_file);
        if (in) {
            try {
                Surrogate s = read_surrogate(in);
                if (s.plan().rule() == rule_ && s.plan().dim() == n_ && s.plan().level() == w) {
                    for (std::size_t k = 0; k < s.plan().knot_count(); ++k) {
                        const auto q = s.plan().knot(k);
                        std::vector<double> vals;
                        for (const auto& col : s.values()) vals.push_back(col[k]);
                        memo_.emplace(std::vector<double>(q.begin(), q.end()), std::move(vals));
                    }
                    return s;
                }
            } catch (const std::exception&) {
                // unreadable cache entries are rebuilt
            }
        }
    }
    // memo_ is read-only while knots are evaluated concurrently
    std::vector<char> fresh(plan->knot_count(), 1);
    for (std::size_t k = 0; k < plan->knot_count(); ++k) {
        const auto q = plan->knot(k);
        if (memo_.count(std::vector<double>(q.begin(), q.end()))) fresh[k] = 0;
    }
    const auto& memo = memo_;
    const KnotFunction lookup = [&memo, this](std::span<const double> q) {
        const auto it = memo.find(std::vector<double>(q.begin(), q.end()));
        return it != memo.end() ? it->second : f_(q);
    };
    Surrogate s = build_surrogate(plan, lookup, opts_);
    for (std::size_t k = 0; k < plan->knot_count(); ++k) {
        if (!fresh[k]) continue;
        ++evaluations_;
        const auto q = plan->knot(k);
        std::vector<double> vals;
        for (const auto& col : s.values()) vals.push_back(col[k]);
        memo_.emplace(std::vector<double>(q.begin(), q.end()), std::move(vals));
    }
    if (!cache_file.empty()) {
        std::filesystem::create_directories(cache_file.parent_path());
        const auto tmp = cache_file.string() + ".tmp";
        {
            std::ofstream out(tmp);
            write_surrogate(out, s);
        }
        std::filesystem::rename(tmp, cache_file);
    }
    return s;
}

MomentEstimate uniform_moments(const Surrogate& s, const ParallelOptions& opts) {
    const int n = s.plan().dim();
    const auto density = DensityModel::uniform(n);
    const auto quad = default_quadrature(density.rho_hat, s.plan().max_degree());
    return surrogate_moments(s, density, quad, opts).at(0);
}

UqStudy run_uq_convergence(const ExperimentConfig& c) {
    validate_config(c);
    const CaseFile cf = load_case(c.case_spec);
    const PowerNetwork net = to_network(cf);
    const auto pert = make_perturbation(net, c);
    const NewtonOptions nopts{c.tol, c.max_iter};
    const ParallelOptions popts{Execution::Parallel, c.workers};
    const GridRule rule{c.rule, NodeKind::ClenshawCurtis};

    std::ostringstream tag;
    tag << std::setprecision(17) << serialize(cf) << '|' << to_string(c.rule) << '|'
        << static_cast<int>(c.qoi.kind) << ':' << c.qoi.bus << '|' << c.tol << '|' << c.max_iter
        << '|' << static_cast<int>(c.start);
    for (const auto& t : pert.loads) tag << "|L" << t.bus << ',' << t.c_p << ',' << t.c_q << ',' << t.dims.size();
    for (const auto& t : pert.admittances) tag << "|A" << t.branch << ',' << t.c_g << ',' << t.c_b;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(tag.str())));

    SurrogateBuilder builder(KnotSolver(net, pert, c.qoi, nopts, c.start), rule, pert.n, popts,
                             c.cache_dir, hex);
    auto run_level = [&](int w) {
        const auto t0 = std::chrono::steady_clock::now();
        const Surrogate s = builder.build(w);
        const auto m = uniform_moments(s, popts);
        const auto t1 = std::chrono::steady_clock::now();
        UqRow row;
        row.w = w;
        row.knots = s.plan().knot_count();
        row.mean = m.mean;
        row.var = m.variance.value;
        row.wall_ms = c.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;
        return row;
    };
    UqStudy study;
    for (int w : c.levels) study.rows.push_back(run_level(w));
    study.reference = run_level(c.reference_level);
    for (auto& r : study.rows) {
        r.err_mean = std::abs(r.mean - study.reference.mean);
        r.err_var = std::abs(r.var - study.reference.var);
    }
    return study;
}

void write_uq_csv(std::ostream& os, const UqStudy& study) {
    os << kCsvSchema << '\n';
    os << "w,knots,mean,var,err_mean,err_var,wall_ms\n";
    auto row = [&os](const UqRow& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.w, r.knots, r.mean,
                      r.var, r.err_mean, r.err_var, r.wall_ms);
        os << buf;
    };
    for (const auto& r : study.rows) row(r);
    os << "# reference\n";
    row(study.reference);
}

}  // namespace sgpf
