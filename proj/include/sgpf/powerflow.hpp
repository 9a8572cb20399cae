#pragma once

#include <span>
#include <string>
#include <vector>

#include "sgpf/linalg.hpp"
#include "sgpf/newton.hpp"

namespace sgpf {

enum class BusKind { Slack, PV, PQ };

[[nodiscard]] const char* to_string(BusKind k) noexcept;

/// Per-unit bus data. Ids are the external (1-based) bus numbers.
struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double p_load = 0.0;
    double q_load = 0.0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double v_setpoint = 1.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    /// Starting point stored with the case (magnitude, radians).
    double v_case = 1.0;
    double theta_case = 0.0;

    friend bool operator==(const Bus&, const Bus&) = default;
};

/// pi-model branch. The series admittance 1/(r+ix) has its conductance and
/// susceptance multiplied by g_scale and b_scale.
struct Branch {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;
    double tap = 1.0;
    double phase_shift = 0.0;  ///< radians
    double g_scale = 1.0;
    double b_scale = 1.0;

    friend bool operator==(const Branch&, const Branch&) = default;
};

class PowerNetwork {
  public:
    PowerNetwork() = default;
    /// Validates the data (one slack, known endpoints, nonzero impedances,
    /// positive setpoints) and assembles the admittance matrix.
    PowerNetwork(std::string name, double base_mva, std::vector<Bus> buses,
                 std::vector<Branch> branches);

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] double base_mva() const noexcept { return base_mva_; }
    [[nodiscard]] const std::vector<Bus>& buses() const noexcept { return buses_; }
    [[nodiscard]] const std::vector<Branch>& branches() const noexcept { return branches_; }
    [[nodiscard]] const CMatrix& ybus() const noexcept { return ybus_; }

    /// 0-based position of a bus id; throws ContractViolation if unknown.
    [[nodiscard]] int index_of(int bus_id) const;
    [[nodiscard]] int slack_index() const noexcept { return slack_; }
    /// Bus positions carrying an angle unknown (every non-slack bus).
    [[nodiscard]] const std::vector<int>& angle_buses() const noexcept { return angle_buses_; }
    /// Bus positions carrying a magnitude unknown (PQ buses).
    [[nodiscard]] const std::vector<int>& magnitude_buses() const noexcept { return mag_buses_; }
    [[nodiscard]] int state_size() const noexcept {
        return static_cast<int>(angle_buses_.size() + mag_buses_.size());
    }

  private:
    std::string name_;
    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    CMatrix ybus_;
    std::vector<int> id_to_index_;
    int slack_ = -1;
    std::vector<int> angle_buses_;
    std::vector<int> mag_buses_;
};

/// pi-model assembly of G + iB.
[[nodiscard]] CMatrix assemble_ybus(const PowerNetwork& network);

/// Unknowns x = [theta at angle_buses(); V at magnitude_buses()].
struct StateVector {
    Vector theta;
    Vector v;

    [[nodiscard]] Vector stacked() const;
    static StateVector split(const PowerNetwork& network, const Vector& x);
};

struct LoadTerm {
    int bus = 0;  ///< bus id
    double c_p = 0.0;
    double c_q = 0.0;
    /// One index (shared by P and Q) or two (P, Q); 0-based parameter indices.
    std::vector<int> dims;
};

struct AdmittanceTerm {
    int branch = 0;  ///< 1-based branch number in case order
    double c_g = 0.0;
    double c_b = 0.0;
    /// One index (shared by G and B) or two (G, B); 0-based parameter indices.
    std::vector<int> dims;
};

/// P_k -> P_k (1 + c_p q), Q_k -> Q_k (1 + c_q q), and likewise for the
/// series conductance / susceptance of the listed branches.
struct StochasticPerturbation {
    int n = 0;
    std::vector<LoadTerm> loads;
    std::vector<AdmittanceTerm> admittances;

    /// Throws ContractViolation on bad indices, unknown buses or branches.
    void validate(const PowerNetwork& network) const;
};

/// Network data in the scalar type T (double, or complex for the analytic
/// extension in the parameters).
template <typename T>
struct NetworkModel {
    MatrixT<T> g;
    MatrixT<T> b;
    VectorT<T> p_sched;
    VectorT<T> q_sched;
    /// Magnitudes of buses without a magnitude unknown.
    std::vector<double> v_fixed;
    const PowerNetwork* network = nullptr;
};

template <typename T>
[[nodiscard]] NetworkModel<T> build_model(const PowerNetwork& network,
                                          const StochasticPerturbation& pert,
                                          std::span<const T> q);

[[nodiscard]] NetworkModel<double> build_model(const PowerNetwork& network);
/// Models keep a pointer to their network.
NetworkModel<double> build_model(PowerNetwork&&) = delete;

/// Complex injections P_k, Q_k at every bus for state x.
template <typename T>
void bus_injections(const NetworkModel<T>& m, const VectorT<T>& x, VectorT<T>& p, VectorT<T>& q);

/// [dP at angle buses; dQ at magnitude buses]. DomainError if some V <= 0
/// (|V| = 0 for complex states).
template <typename T>
[[nodiscard]] VectorT<T> residual(const NetworkModel<T>& m, const VectorT<T>& x);

template <typename T>
[[nodiscard]] MatrixT<T> jacobian(const NetworkModel<T>& m, const VectorT<T>& x);

extern template NetworkModel<double> build_model(const PowerNetwork&, const StochasticPerturbation&,
                                                 std::span<const double>);
extern template NetworkModel<Complex> build_model(const PowerNetwork&,
                                                  const StochasticPerturbation&,
                                                  std::span<const Complex>);
extern template void bus_injections(const NetworkModel<double>&, const Vector&, Vector&, Vector&);
extern template void bus_injections(const NetworkModel<Complex>&, const CVector&, CVector&,
                                    CVector&);
extern template Vector residual(const NetworkModel<double>&, const Vector&);
extern template CVector residual(const NetworkModel<Complex>&, const CVector&);
extern template Matrix jacobian(const NetworkModel<double>&, const Vector&);
extern template CMatrix jacobian(const NetworkModel<Complex>&, const CVector&);

[[nodiscard]] Vector residual(const PowerNetwork& network, const Vector& x);
[[nodiscard]] Matrix jacobian(const PowerNetwork& network, const Vector& x);

enum class StartKind { Flat, FromCase };

[[nodiscard]] Vector start_state(const PowerNetwork& network, StartKind start);

struct PowerFlowResult {
    StateVector state;
    Vector x;
    NewtonTrace trace;
};

[[nodiscard]] PowerFlowResult solve_power_flow(const PowerNetwork& network,
                                               StartKind start = StartKind::FromCase,
                                               const NewtonOptions& opts = {});

/// Returns a fresh network with loads and branch admittances scaled at q.
[[nodiscard]] PowerNetwork apply_perturbation(const PowerNetwork& network,
                                              const StochasticPerturbation& pert,
                                              std::span<const double> q);

/// NewtonProblem whose parameters are the perturbation coordinates q.
[[nodiscard]] NewtonProblem power_flow_problem(const PowerNetwork& network,
                                               const StochasticPerturbation& pert);

/// Holomorphic extension in (x, g) of power_flow_problem.
[[nodiscard]] ComplexExtension power_flow_extension(const PowerNetwork& network,
                                                    const StochasticPerturbation& pert);

struct QoiSpec {
    enum class Kind { Voltage, Angle } kind = Kind::Voltage;
    int bus = 0;  ///< bus id
};

/// Reads V or theta of a bus from state x; setpoints for fixed quantities.
[[nodiscard]] double quantity_of_interest(const PowerNetwork& network, const Vector& x,
                                          const QoiSpec& spec);

}  // namespace sgpf
