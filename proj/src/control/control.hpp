#pragma once

#include <iosfwd>

#include "parabolic/parabolic.hpp"

namespace otstab {

struct ControlOptions {
    double epsilon = 1e-6;
    double terminal_tol = 1e-3;  // relative to |target|
    int max_iter = 500;
    double gradient_tol = 1e-8;  // relative to the initial gradient
    double stop_terminal = 0.0;  // > 0: also stop once |psi - target| <= stop_terminal |target|
    std::ostream* log = nullptr; // JSON lines per iteration
};

/// Boundary flux omega on steps [first_step, N) such that the adjoint state
/// (W + theta dt A) psi_n = (W - (1-theta) dt A) psi_{n+1} + dt B omega_n,
/// started from psi_N = 0, reaches psi_{first_step} ~ target. Solved as the
/// penalized least-squares problem by CG on the normal equations.
BoundaryControl solve_null_control(const ScalarField& target, const ThetaStepper& stepper, std::size_t first_step,
                                   const ControlOptions& opt = {});
/// Same problem with the penalty centred on a reference flux: minimizes
/// |psi - target|^2/2 + eps |omega - reference|^2/2. With the flux of a field
/// that already solves the adjoint equation past the control window, the
/// correction only has to cancel the free evolution of its terminal value.
BoundaryControl solve_null_control(const ScalarField& target, const ThetaStepper& stepper, std::size_t first_step,
                                   const std::vector<std::vector<double>>& reference, const ControlOptions& opt = {});
BoundaryControl solve_null_control(const ScalarField& target, const CoefficientSet& coeffs, const TimeGrid& time,
                                   std::size_t first_step, const ControlOptions& opt = {});

/// psi at `first_step` driven by omega (psi_N = 0).
std::vector<double> control_to_state(const ThetaStepper& stepper, const BoundaryControl& omega);

/// |LHS - RHS| / (|LHS| + |RHS| + 1e-14) with LHS = int u(T*) v(T*) and
/// RHS = the boundary pairing of u with omega over [T*, T].
double verify_transfer_identity(const ParabolicSolution& u_diff, const ScalarField& v_snapshot,
                                const BoundaryControl& omega);

/// time,arc,value rows with time at step midpoints.
void write_control_csv(std::ostream& os, const Grid2D& grid, const TimeGrid& time, const BoundaryControl& omega);

}  // namespace otstab
