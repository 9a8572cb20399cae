#include "sgpf/powerflow.hpp"

#include <algorithm>
#include <cmath>

namespace sgpf {

const char* to_string(BusKind k) noexcept {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "unknown";
}

PowerNetwork::PowerNetwork(std::string name, double base_mva, std::vector<Bus> buses,
                           std::vector<Branch> branches)
    : name_(std::move(name)), base_mva_(base_mva), buses_(std::move(buses)),
      branches_(std::move(branches)) {
    if (!(base_mva_ > 0.0)) throw ContractViolation("network: base_mva must be positive");
    if (buses_.empty()) throw ContractViolation("network: no buses");
    int max_id = 0;
    for (const auto& b : buses_) {
        if (b.id < 1) throw ContractViolation("network: bus ids must be positive");
        max_id = std::max(max_id, b.id);
    }
    id_to_index_.assign(static_cast<std::size_t>(max_id) + 1, -1);
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const auto& b = buses_[i];
        auto& slot = id_to_index_[static_cast<std::size_t>(b.id)];
        if (slot >= 0) throw ContractViolation("network: duplicate bus id " + std::to_string(b.id));
        slot = static_cast<int>(i);
        if (b.kind == BusKind::Slack) {
            if (slack_ >= 0) throw ContractViolation("network: more than one slack bus");
            slack_ = static_cast<int>(i);
        }
        if (b.kind != BusKind::PQ && !(b.v_setpoint > 0.0)) {
            throw ContractViolation("network: nonpositive voltage setpoint at bus " +
                                    std::to_string(b.id));
        }
    }
    if (slack_ < 0) throw ContractViolation("network: no slack bus");
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].kind != BusKind::Slack) angle_buses_.push_back(static_cast<int>(i));
        if (buses_[i].kind == BusKind::PQ) mag_buses_.push_back(static_cast<int>(i));
    }
    for (const auto& br : branches_) {
        (void)index_of(br.from);
        (void)index_of(br.to);
        if (br.from == br.to) throw ContractViolation("network: branch connects a bus to itself");
        if (br.r == 0.0 && br.x == 0.0) throw ContractViolation("network: zero-impedance branch");
        if (br.tap == 0.0) throw ContractViolation("network: zero tap ratio");
    }
    ybus_ = assemble_ybus(*this);
}

int PowerNetwork::index_of(int bus_id) const {
    if (bus_id < 1 || static_cast<std::size_t>(bus_id) >= id_to_index_.size() ||
        id_to_index_[static_cast<std::size_t>(bus_id)] < 0) {
        throw ContractViolation("network: unknown bus id " + std::to_string(bus_id));
    }
    return id_to_index_[static_cast<std::size_t>(bus_id)];
}

namespace {

/// Adds a * (gpart + i bpart) to entry (k, l) of G + iB, keeping G and B apart
/// so that gpart and bpart may themselves be complex.
template <typename T>
void add_entry(MatrixT<T>& g, MatrixT<T>& b, int k, int l, Complex a, const T& gpart,
               const T& bpart) {
    g(k, l) += a.real() * gpart - a.imag() * bpart;
    b(k, l) += a.imag() * gpart + a.real() * bpart;
}

template <typename T>
void assemble_gb(const PowerNetwork& net, std::span<const T> g_scale, std::span<const T> b_scale,
                 MatrixT<T>& g, MatrixT<T>& b) {
    const auto n = static_cast<Eigen::Index>(net.buses().size());
    g = MatrixT<T>::Zero(n, n);
    b = MatrixT<T>::Zero(n, n);
    const auto& branches = net.branches();
    for (std::size_t e = 0; e < branches.size(); ++e) {
        const auto& br = branches[e];
        const int f = net.index_of(br.from);
        const int t = net.index_of(br.to);
        const double z2 = br.r * br.r + br.x * br.x;
        const T gs = (br.r / z2) * g_scale[e];
        const T bs = (-br.x / z2) * b_scale[e];
        const T bc = T(br.b_charging / 2.0);
        const Complex shift = std::polar(br.tap, br.phase_shift);
        add_entry(g, b, t, t, Complex(1.0), gs, T(bs + bc));
        add_entry(g, b, f, f, Complex(1.0 / (br.tap * br.tap)), gs, T(bs + bc));
        add_entry(g, b, f, t, -1.0 / std::conj(shift), gs, bs);
        add_entry(g, b, t, f, -1.0 / shift, gs, bs);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& bus = net.buses()[static_cast<std::size_t>(k)];
        g(k, k) += bus.g_shunt;
        b(k, k) += bus.b_shunt;
    }
}

double magnitude(double v) { return v; }
double magnitude(const Complex& v) { return std::abs(v); }

/// Full per-bus magnitudes and angles from the unknowns.
template <typename T>
void expand_state(const NetworkModel<T>& m, const VectorT<T>& x, VectorT<T>& vm, VectorT<T>& va) {
    const auto& net = *m.network;
    const auto n = static_cast<Eigen::Index>(net.buses().size());
    if (x.size() != net.state_size()) throw ContractViolation("powerflow: state size mismatch");
    vm.resize(n);
    va = VectorT<T>::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) vm(k) = T(m.v_fixed[static_cast<std::size_t>(k)]);
    const auto& ab = net.angle_buses();
    const auto& mb = net.magnitude_buses();
    for (std::size_t i = 0; i < ab.size(); ++i) va(ab[i]) = x(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < mb.size(); ++i) {
        const T v = x(static_cast<Eigen::Index>(ab.size() + i));
        if (!(magnitude(v) > 0.0) || !std::isfinite(magnitude(v))) {
            throw DomainError("powerflow: nonpositive voltage magnitude at bus " +
                              std::to_string(net.buses()[static_cast<std::size_t>(mb[i])].id));
        }
        vm(mb[i]) = v;
    }
}

template <typename T>
T scale_factor(double c, std::span<const T> q, const std::vector<int>& dims, std::size_t which) {
    const int d = dims[std::min(which, dims.size() - 1)];
    return T(1.0) + c * q[static_cast<std::size_t>(d)];
}

}  // namespace

CMatrix assemble_ybus(const PowerNetwork& network) {
    const std::size_t ne = network.branches().size();
    std::vector<double> gs(ne);
    std::vector<double> bs(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        gs[e] = network.branches()[e].g_scale;
        bs[e] = network.branches()[e].b_scale;
    }
    Matrix g;
    Matrix b;
    assemble_gb<double>(network, gs, bs, g, b);
    CMatrix y(g.rows(), g.cols());
    y.real() = g;
    y.imag() = b;
    return y;
}

Vector StateVector::stacked() const {
    Vector x(theta.size() + v.size());
    x << theta, v;
    return x;
}

StateVector StateVector::split(const PowerNetwork& network, const Vector& x) {
    const auto na = static_cast<Eigen::Index>(network.angle_buses().size());
    if (x.size() != network.state_size()) throw ContractViolation("powerflow: state size mismatch");
    return {x.head(na), x.tail(x.size() - na)};
}

void StochasticPerturbation::validate(const PowerNetwork& network) const {
    if (n < 0) throw ContractViolation("perturbation: negative dimension");
    auto check_dims = [this](const std::vector<int>& dims) {
        if (dims.empty() || dims.size() > 2) {
            throw ContractViolation("perturbation: each term needs one or two parameter indices");
        }
        for (int d : dims) {
            if (d < 0 || d >= n) throw ContractViolation("perturbation: parameter index out of range");
        }
    };
    for (const auto& t : loads) {
        (void)network.index_of(t.bus);
        check_dims(t.dims);
    }
    for (const auto& t : admittances) {
        if (t.branch < 1 || static_cast<std::size_t>(t.branch) > network.branches().size()) {
            throw ContractViolation("perturbation: unknown branch " + std::to_string(t.branch));
        }
        check_dims(t.dims);
    }
}

template <typename T>
NetworkModel<T> build_model(const PowerNetwork& network, const StochasticPerturbation& pert,
                            std::span<const T> q) {
    if (static_cast<int>(q.size()) != pert.n) {
        throw ContractViolation("powerflow: parameter vector has the wrong dimension");
    }
    const std::size_t nb = network.buses().size();
    const std::size_t ne = network.branches().size();
    std::vector<T> gs(ne);
    std::vector<T> bs(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        gs[e] = T(network.branches()[e].g_scale);
        bs[e] = T(network.branches()[e].b_scale);
    }
    for (const auto& t : pert.admittances) {
        const auto e = static_cast<std::size_t>(t.branch - 1);
        gs[e] *= scale_factor(t.c_g, q, t.dims, 0);
        bs[e] *= scale_factor(t.c_b, q, t.dims, 1);
    }
    NetworkModel<T> m;
    m.network = &network;
    assemble_gb<T>(network, gs, bs, m.g, m.b);

    std::vector<T> p_load(nb);
    std::vector<T> q_load(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        p_load[k] = T(network.buses()[k].p_load);
        q_load[k] = T(network.buses()[k].q_load);
    }
    for (const auto& t : pert.loads) {
        const auto k = static_cast<std::size_t>(network.index_of(t.bus));
        p_load[k] *= scale_factor(t.c_p, q, t.dims, 0);
        q_load[k] *= scale_factor(t.c_q, q, t.dims, 1);
    }
    m.p_sched.resize(static_cast<Eigen::Index>(nb));
    m.q_sched.resize(static_cast<Eigen::Index>(nb));
    m.v_fixed.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& bus = network.buses()[k];
        m.p_sched(static_cast<Eigen::Index>(k)) = bus.p_gen - p_load[k];
        m.q_sched(static_cast<Eigen::Index>(k)) = bus.q_gen - q_load[k];
        m.v_fixed[k] = bus.kind == BusKind::PQ ? 1.0 : bus.v_setpoint;
    }
    return m;
}

NetworkModel<double> build_model(const PowerNetwork& network) {
    return build_model<double>(network, StochasticPerturbation{}, std::span<const double>{});
}

template <typename T>
void bus_injections(const NetworkModel<T>& m, const VectorT<T>& x, VectorT<T>& p, VectorT<T>& q) {
    VectorT<T> vm;
    VectorT<T> va;
    expand_state(m, x, vm, va);
    const auto n = vm.size();
    p = VectorT<T>::Zero(n);
    q = VectorT<T>::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        T pk(0.0);
        T qk(0.0);
        for (Eigen::Index l = 0; l < n; ++l) {
            const T gkl = m.g(k, l);
            const T bkl = m.b(k, l);
            if (gkl == T(0.0) && bkl == T(0.0)) continue;
            const T th = va(k) - va(l);
            const T c = std::cos(th);
            const T s = std::sin(th);
            pk += vm(l) * (gkl * c + bkl * s);
            qk += vm(l) * (gkl * s - bkl * c);
        }
        p(k) = vm(k) * pk;
        q(k) = vm(k) * qk;
    }
}

template <typename T>
VectorT<T> residual(const NetworkModel<T>& m, const VectorT<T>& x) {
    VectorT<T> p;
    VectorT<T> q;
    bus_injections(m, x, p, q);
    const auto& ab = m.network->angle_buses();
    const auto& mb = m.network->magnitude_buses();
    VectorT<T> f(static_cast<Eigen::Index>(ab.size() + mb.size()));
    for (std::size_t i = 0; i < ab.size(); ++i) {
        f(static_cast<Eigen::Index>(i)) = p(ab[i]) - m.p_sched(ab[i]);
    }
    for (std::size_t i = 0; i < mb.size(); ++i) {
        f(static_cast<Eigen::Index>(ab.size() + i)) = q(mb[i]) - m.q_sched(mb[i]);
    }
    return f;
}

template <typename T>
MatrixT<T> jacobian(const NetworkModel<T>& m, const VectorT<T>& x) {
    VectorT<T> vm;
    VectorT<T> va;
    expand_state(m, x, vm, va);
    VectorT<T> p;
    VectorT<T> q;
    bus_injections(m, x, p, q);
    const auto n = vm.size();
    // full-bus blocks, restricted to the unknowns below
    MatrixT<T> dp_dth = MatrixT<T>::Zero(n, n);
    MatrixT<T> dp_dv = MatrixT<T>::Zero(n, n);
    MatrixT<T> dq_dth = MatrixT<T>::Zero(n, n);
    MatrixT<T> dq_dv = MatrixT<T>::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
            if (l == k) continue;
            const T gkl = m.g(k, l);
            const T bkl = m.b(k, l);
            if (gkl == T(0.0) && bkl == T(0.0)) continue;
            const T th = va(k) - va(l);
            const T c = std::cos(th);
            const T s = std::sin(th);
            const T a = gkl * s - bkl * c;
            const T d = gkl * c + bkl * s;
            dp_dth(k, l) = vm(k) * vm(l) * a;
            dq_dth(k, l) = -vm(k) * vm(l) * d;
            dp_dv(k, l) = vm(k) * d;
            dq_dv(k, l) = vm(k) * a;
        }
        const T gkk = m.g(k, k);
        const T bkk = m.b(k, k);
        const T v2 = vm(k) * vm(k);
        dp_dth(k, k) = -q(k) - bkk * v2;
        dp_dv(k, k) = p(k) / vm(k) + gkk * vm(k);
        dq_dth(k, k) = p(k) - gkk * v2;
        dq_dv(k, k) = q(k) / vm(k) - bkk * vm(k);
    }
    const auto& ab = m.network->angle_buses();
    const auto& mb = m.network->magnitude_buses();
    const auto na = static_cast<Eigen::Index>(ab.size());
    const auto nm = static_cast<Eigen::Index>(mb.size());
    MatrixT<T> j(na + nm, na + nm);
    for (Eigen::Index r = 0; r < na; ++r) {
        for (Eigen::Index c = 0; c < na; ++c) j(r, c) = dp_dth(ab[r], ab[c]);
        for (Eigen::Index c = 0; c < nm; ++c) j(r, na + c) = dp_dv(ab[r], mb[c]);
    }
    for (Eigen::Index r = 0; r < nm; ++r) {
        for (Eigen::Index c = 0; c < na; ++c) j(na + r, c) = dq_dth(mb[r], ab[c]);
        for (Eigen::Index c = 0; c < nm; ++c) j(na + r, na + c) = dq_dv(mb[r], mb[c]);
    }
    return j;
}

template NetworkModel<double> build_model(const PowerNetwork&, const StochasticPerturbation&,
                                          std::span<const double>);
template NetworkModel<Complex> build_model(const PowerNetwork&, const StochasticPerturbation&,
                                           std::span<const Complex>);
template void bus_injections(const NetworkModel<double>&, const Vector&, Vector&, Vector&);
template void bus_injections(const NetworkModel<Complex>&, const CVector&, CVector&, CVector&);
template Vector residual(const NetworkModel<double>&, const Vector&);
template CVector residual(const NetworkModel<Complex>&, const CVector&);
template Matrix jacobian(const NetworkModel<double>&, const Vector&);
template CMatrix jacobian(const NetworkModel<Complex>&, const CVector&);

Vector residual(const PowerNetwork& network, const Vector& x) {
    return residual(build_model(network), x);
}

Matrix jacobian(const PowerNetwork& network, const Vector& x) {
    return jacobian(build_model(network), x);
}

Vector start_state(const PowerNetwork& network, StartKind start) {
    const auto& ab = network.angle_buses();
    const auto& mb = network.magnitude_buses();
    Vector x(network.state_size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
        const auto& bus = network.buses()[static_cast<std::size_t>(ab[i])];
        x(static_cast<Eigen::Index>(i)) = start == StartKind::Flat ? 0.0 : bus.theta_case;
    }
    for (std::size_t i = 0; i < mb.size(); ++i) {
        const auto& bus = network.buses()[static_cast<std::size_t>(mb[i])];
        x(static_cast<Eigen::Index>(ab.size() + i)) = start == StartKind::Flat ? 1.0 : bus.v_case;
    }
    return x;
}

PowerFlowResult solve_power_flow(const PowerNetwork& network, StartKind start,
                                 const NewtonOptions& opts) {
    const auto problem = power_flow_problem(network, StochasticPerturbation{});
    PowerFlowResult out;
    out.trace = solve(problem, start_state(network, start), Vector(), opts);
    out.x = out.trace.solution();
    out.state = StateVector::split(network, out.x);
    return out;
}

PowerNetwork apply_perturbation(const PowerNetwork& network, const StochasticPerturbation& pert,
                                std::span<const double> q) {
    pert.validate(network);
    if (static_cast<int>(q.size()) != pert.n) {
        throw ContractViolation("perturbation: parameter vector has the wrong dimension");
    }
    std::vector<Bus> buses = network.buses();
    std::vector<Branch> branches = network.branches();
    for (const auto& t : pert.loads) {
        auto& bus = buses[static_cast<std::size_t>(network.index_of(t.bus))];
        bus.p_load *= scale_factor(t.c_p, q, t.dims, 0);
        bus.q_load *= scale_factor(t.c_q, q, t.dims, 1);
    }
    for (const auto& t : pert.admittances) {
        auto& br = branches[static_cast<std::size_t>(t.branch - 1)];
        br.g_scale *= scale_factor(t.c_g, q, t.dims, 0);
        br.b_scale *= scale_factor(t.c_b, q, t.dims, 1);
        if (br.g_scale * br.r == 0.0 && br.b_scale * br.x == 0.0) {
            throw ContractViolation("perturbation: branch admittance vanishes");
        }
    }
    return PowerNetwork(network.name(), network.base_mva(), std::move(buses), std::move(branches));
}

NewtonProblem power_flow_problem(const PowerNetwork& network, const StochasticPerturbation& pert) {
    pert.validate(network);
    NewtonProblem p;
    p.residual = [&network, pert](const Vector& x, const Vector& q) {
        const auto m = build_model<double>(network, pert, {q.data(), static_cast<std::size_t>(q.size())});
        return residual(m, x);
    };
    p.jacobian = [&network, pert](const Vector& x, const Vector& q) {
        const auto m = build_model<double>(network, pert, {q.data(), static_cast<std::size_t>(q.size())});
        return jacobian(m, x);
    };
    return p;
}

ComplexExtension power_flow_extension(const PowerNetwork& network,
                                      const StochasticPerturbation& pert) {
    pert.validate(network);
    ComplexExtension e;
    e.residual = [&network, pert](const CVector& z, const CVector& g) {
        const auto m = build_model<Complex>(network, pert, {g.data(), static_cast<std::size_t>(g.size())});
        return residual(m, z);
    };
    e.jacobian = [&network, pert](const CVector& z, const CVector& g) {
        const auto m = build_model<Complex>(network, pert, {g.data(), static_cast<std::size_t>(g.size())});
        return jacobian(m, z);
    };
    return e;
}

double quantity_of_interest(const PowerNetwork& network, const Vector& x, const QoiSpec& spec) {
    const int k = network.index_of(spec.bus);
    if (x.size() != network.state_size()) throw ContractViolation("qoi: state size mismatch");
    const auto& bus = network.buses()[static_cast<std::size_t>(k)];
    const auto& ab = network.angle_buses();
    const auto& mb = network.magnitude_buses();
    if (spec.kind == QoiSpec::Kind::Angle) {
        if (bus.kind == BusKind::Slack) return 0.0;
        const auto it = std::find(ab.begin(), ab.end(), k);
        return x(static_cast<Eigen::Index>(it - ab.begin()));
    }
    if (bus.kind != BusKind::PQ) return bus.v_setpoint;
    const auto it = std::find(mb.begin(), mb.end(), k);
    return x(static_cast<Eigen::Index>(ab.size() + static_cast<std::size_t>(it - mb.begin())));
}

}  // namespace sgpf
