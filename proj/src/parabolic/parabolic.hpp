#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "cgo/cgo.hpp"
#include "core/banded.hpp"
#include "grid/grid.hpp"
#include "measures/measures.hpp"

namespace otstab {

/// Nodes t_0 < ... < t_N with a theta per step (1/2 Crank-Nicolson, 1 implicit Euler).
struct TimeGrid {
    std::vector<double> t;
    std::vector<double> theta;

    std::size_t steps() const noexcept { return theta.size(); }
    double dt(std::size_t n) const { return t[n + 1] - t[n]; }
    double mid(std::size_t n) const { return 0.5 * (t[n] + t[n + 1]); }
    /// Node index at time `time` (invalid_argument if it is not a node).
    std::size_t index_of(double time) const;
};

/// Uniform dt = T/nt; the first `rannacher` steps are each replaced by two
/// implicit Euler half steps to damp the stiff transient of rough data.
TimeGrid make_time_grid(double T, std::size_t nt, std::size_t rannacher = 2);

/// One theta step is W(u1 - u0) + dt A (theta u1 + (1-theta) u0) = dt F with
/// A = K + W q (kappa = 1, Neumann). The adjoint step runs the same matrices
/// backwards; pairing them gives exact discrete Green identities.
class ThetaStepper {
public:
    ThetaStepper(const CoefficientSet& coeffs, const TimeGrid& time);

    const DiffusionOperator& op() const { return op_; }
    const TimeGrid& time() const { return time_; }

    /// u <- u_{n+1}; `load` (may be empty) is F_n, a nodal load vector.
    void forward(std::size_t n, std::vector<double>& u, std::span<const double> load) const;
    /// psi <- psi_n from psi_{n+1}; `boundary_load` (may be empty) is added as dt * B_n on boundary nodes.
    void adjoint(std::size_t n, std::vector<double>& psi, std::span<const double> boundary_load) const;

private:
    const BandedLdlt<double>& factor(std::size_t n) const;
    void explicit_part(std::size_t n, std::span<const double> x, std::vector<double>& rhs) const;

    DiffusionOperator op_;
    TimeGrid time_;
    std::map<std::pair<double, double>, std::shared_ptr<BandedLdlt<double>>> factors_;
    std::vector<const BandedLdlt<double>*> step_factor_;
    mutable std::vector<double> work_;
};

struct ParabolicOptions {
    std::size_t rannacher = 2;
    bool keep_full = false;
};

struct ParabolicSolution {
    GridPtr grid;
    std::shared_ptr<const DiffusionOperator> op;
    TimeGrid time;
    double T = 0.0, tstar = 0.0;
    std::size_t nt = 0;
    std::size_t tstar_index = 0;
    std::vector<std::vector<double>> sigma_trace;  // [time node][boundary node]
    ScalarField snapshot_tstar;
    ScalarField final_state;
    std::vector<double> mass;                      // area integral of u per node
    std::vector<std::vector<double>> full;         // only with keep_full

    double dt() const { return T / static_cast<double>(nt); }
    /// theta-weighted boundary trace of step n.
    double trace_theta(std::size_t n, std::size_t k) const;
};

ParabolicSolution difference(const ParabolicSolution& a, const ParabolicSolution& b);

/// Point sources g_j(t) delta_{s_j}; g is evaluated at step midpoints.
ParabolicSolution solve_forward_pt_sources(const CoefficientSet& coeffs, const SpaceTimeAtomicMeasure& src, double T,
                                           double tstar, std::size_t nt, const ParabolicOptions& opt = {});

/// Zero source, u(0) = W^{-1} (hat load of mu0).
ParabolicSolution solve_forward_initial_data(const CoefficientSet& coeffs, const AtomicMeasure& mu0, double T,
                                             std::size_t nt, const ParabolicOptions& opt = {});

/// Neumann data on boundary nodes for steps [first_step, steps).
struct BoundaryControl {
    std::size_t first_step = 0;
    std::vector<std::vector<double>> omega;  // [step - first_step][boundary node]
    double achieved_terminal = 0.0;          // |psi(t_first) - target|_{L2}
    double target_norm = 0.0;
    double control_norm = 0.0;               // |omega|_{L2(Sigma)}
    double epsilon = 0.0;
    int iterations = 0;
    double gradient_ratio = 0.0;
    bool converged = false;
    bool weak_controllability = false;
};

struct ParabolicR {
    Complex snapshot;     // area integral of u(T*) v(T*)
    Complex sigma_minus;  // boundary pairing over [0, T*]
    Complex total() const { return snapshot + sigma_minus; }
};

/// R(v) for v(x,t) = sum_k exp(i omega_k t) V_k(x); conormal derivatives use
/// the discrete flux of the theta scheme.
ParabolicR functional_R_parabolic(const ParabolicSolution& sol, const TimeTestFunction& v);

/// Real discrete conormal flux of v on step n: boundary rows of
/// A w_n - W (v_{n+1} - v_n)/dt_n divided by the arc weight, w_n the theta
/// average. Valid past T* too (the modes are T*-periodic).
std::vector<double> modal_flux(const TimeTestFunction& v, const DiffusionOperator& op, const TimeGrid& time,
                               std::size_t n);
std::vector<std::vector<double>> modal_flux(const TimeTestFunction& v, const DiffusionOperator& op,
                                            const TimeGrid& time, std::size_t first, std::size_t last);

/// Discrete source side sum_n dt_n sum_j g_j(mid_n) w_n(s_j); equals R(v) up to
/// the interior residual of v.
Complex source_pairing_discrete(const ParabolicSolution& sol, const SpaceTimeAtomicMeasure& src,
                                const TimeTestFunction& v);
/// int_0^T* sum_j g_j(t) v(s_j, t) dt in closed form.
Complex source_pairing(const SpaceTimeAtomicMeasure& src, const TimeTestFunction& v);

/// sum_{n >= first_step} dt_n sum_k weight_k u_theta omega.
double boundary_pairing(const ParabolicSolution& sol, const BoundaryControl& omega);

/// Initial-data functional: the boundary pairing of u with omega_v over all of Sigma.
double functional_R_initial(const ParabolicSolution& sol, const BoundaryControl& omega);

/// |u|_{L2(Sigma)} over the steps between two time nodes, using theta-averaged traces.
double sigma_l2(const ParabolicSolution& sol, std::size_t first_node = 0, std::size_t last_node = SIZE_MAX);

/// time,arc,value rows.
void write_sigma_csv(std::ostream& os, const ParabolicSolution& sol);

}  // namespace otstab
