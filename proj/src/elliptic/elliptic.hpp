#pragma once

#include <iosfwd>
#include <vector>

#include "grid/grid.hpp"
#include "measures/measures.hpp"

namespace otstab {

struct EllipticSolution {
    ScalarField u;
    std::vector<Complex> boundary_trace;
    double mass_check = 0.0;  // area integral of q u
    int cg_iterations = 0;
    double relative_residual = 0.0;
};

struct CgOptions {
    double tol = 1e-13;  // relative residual
    int max_iter = 20000;
};

/// Bilinear hat load of unit discrete mass per atom.
std::vector<double> hat_load(const Grid2D& grid, const AtomicMeasure& mu);

/// Jacobi-preconditioned CG for (K + W q) u = f.
int solve_pcg(const DiffusionOperator& op, std::span<const double> f, std::span<double> u, const CgOptions& opt,
              double* relative_residual = nullptr);

/// Atoms must sit at least two cells inside the rectangle (margin error).
void require_atom_margin(const Grid2D& grid, std::span<const Vec2> points);

/// q >= 1e-6 (ill-posed otherwise); atoms at least 2h inside (margin error).
EllipticSolution solve_forward(const CoefficientSet& coeffs, const AtomicMeasure& mu, const CgOptions& opt = {});

enum class FluxMode {
    discrete,          // rows of (K + W(q - shift)) v divided by the arc weight
    finite_difference  // kappa times the one-sided second-order normal derivative
};

/// R(v) = int_{boundary} kappa d_n v u ds.
Complex functional_R(std::span<const Complex> u_trace, const ScalarField& v, const DiffusionOperator& op,
                     FluxMode mode = FluxMode::discrete, Complex shift = {});

/// kappa d_n v on the boundary for either flux mode.
std::vector<Complex> conormal_derivative(const ScalarField& v, const DiffusionOperator& op, FluxMode mode,
                                         Complex shift = {});

/// |R(v) - sum_j a_j v(s_j)|.
double check_reciprocity(const ScalarField& v, const AtomicMeasure& mu, const CoefficientSet& coeffs,
                         FluxMode mode = FluxMode::discrete, const CgOptions& opt = {});

/// node,arc,value rows.
void write_trace_csv(std::ostream& os, const Grid2D& grid, std::span<const Complex> trace);

}  // namespace otstab
