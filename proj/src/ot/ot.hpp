#pragma once

#include <cmath>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "grid/grid.hpp"

namespace otstab {

enum class CostKind { truncated_euclidean, scaled_squared, spacetime };

struct CostSpec {
    CostKind kind = CostKind::truncated_euclidean;
    double cap = 2.0;       // D for truncated_euclidean and spacetime
    double scale = 1.0;     // scaled_squared
    double lambda_t = 1.0;  // spacetime time weight

    /// Upper bound of c over a domain of the given spatial diameter and time span.
    double sup_norm(double diameter, double time_span = 0.0) const;
};

/// A location with an optional time stamp (NaN when absent).
struct CostPoint {
    Vec2 x;
    double t = std::numeric_limits<double>::quiet_NaN();
};

double eval_cost(const CostSpec& c, const CostPoint& x, const CostPoint& y);

/// Dense m x n cost matrix.
struct CostMatrix {
    std::size_t m = 0, n = 0;
    std::vector<double> c;
    double operator()(std::size_t i, std::size_t j) const { return c[i * n + j]; }
    double max() const;
};

CostMatrix cost_matrix(const CostSpec& spec, std::span<const CostPoint> xs, std::span<const CostPoint> ys);

struct TransportResult {
    double cost = 0.0;
    std::vector<double> plan;  // row-major m x n
    std::vector<double> phi, psi;
    std::vector<double> a, b;
    CostMatrix C;
    std::size_t pivots = 0;

    double at(std::size_t i, std::size_t j) const { return plan[i * C.n + j]; }
};

/// Transportation simplex with Bland's rule; duals from the optimal tree with phi_0 = 0.
TransportResult solve_ot(std::span<const double> a, std::span<const double> b, const CostMatrix& C);

/// Minimum over all basic feasible plans (spanning trees of K_{m,n}); m, n <= 4.
double brute_force_ot(std::span<const double> a, std::span<const double> b, const CostMatrix& C);

struct DualPair {
    std::vector<double> phi, psi;
};

/// c-transform, shift so that max psi = 0, then c-transform back. Output lies
/// in the box 0 <= phi <= sup_norm, -sup_norm <= psi <= 0.
DualPair normalize_potentials(const DualPair& duals, const CostMatrix& C, double sup_norm);

double dual_value(const DualPair& d, std::span<const double> a, std::span<const double> b);
double primal_value(std::span<const double> plan, const CostMatrix& C);

/// I[pi] - J(phi, psi).
double duality_gap(const TransportResult& r);

/// (row, col, mass, cost) for every nonzero plan entry.
void write_plan_csv(std::ostream& os, const TransportResult& r);

}  // namespace otstab
