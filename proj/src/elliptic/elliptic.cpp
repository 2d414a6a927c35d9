#include "elliptic/elliptic.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "core/error.hpp"

namespace otstab {

std::vector<double> hat_load(const Grid2D& grid, const AtomicMeasure& mu)
{
    std::vector<double> f(grid.size(), 0.0);
    for (const auto& atom : mu.atoms)
        for (const auto& [node, w] : hat_weights(grid, atom.s)) f[node] += atom.a * w;
    return f;
}

int solve_pcg(const DiffusionOperator& op, std::span<const double> f, std::span<double> u, const CgOptions& opt,
              double* relative_residual)
{
    const std::size_t n = f.size();
    require(u.size() == n && n == op.grid().size(), ErrorCode::shape_mismatch, "CG vector sizes differ");
    std::vector<double> r(n), z(n), p(n), Ap(n), dinv(n);
    for (std::size_t i = 0; i < n; ++i) dinv[i] = 1.0 / op.diagonal(i);
    op.apply(u, Ap);
    double fnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = f[i] - Ap[i];
        fnorm += f[i] * f[i];
    }
    fnorm = std::sqrt(fnorm);
    if (fnorm == 0.0) {
        std::fill(u.begin(), u.end(), 0.0);
        if (relative_residual) *relative_residual = 0.0;
        return 0;
    }
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * (z[i] = dinv[i] * r[i]);
    p = z;
    int it = 0;
    double rnorm = 0.0;
    for (; it < opt.max_iter; ++it) {
        rnorm = 0.0;
        for (double x : r) rnorm += x * x;
        rnorm = std::sqrt(rnorm);
        if (rnorm <= opt.tol * fnorm) break;
        op.apply(p, Ap);
        double pAp = 0.0;
        for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
        const double alpha = rz / pAp;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * (z[i] = dinv[i] * r[i]);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (relative_residual) *relative_residual = rnorm / fnorm;
    if (rnorm > opt.tol * fnorm) fail(ErrorCode::solver_stagnation, "CG did not reach its tolerance");
    return it;
}

void require_atom_margin(const Grid2D& g, std::span<const Vec2> points)
{
    const auto& r = g.rect();
    for (const auto& s : points) {
        const double dx = std::min(s.x1 - r.lo.x1, r.hi.x1 - s.x1);
        const double dy = std::min(s.x2 - r.lo.x2, r.hi.x2 - s.x2);
        require(dx >= 2.0 * g.hx() - 1e-12 && dy >= 2.0 * g.hy() - 1e-12, ErrorCode::margin,
                "atom closer than 2h to the boundary");
    }
}

EllipticSolution solve_forward(const CoefficientSet& c, const AtomicMeasure& mu, const CgOptions& opt)
{
    const auto& g = *c.grid;
    require(c.q_min >= 1e-6, ErrorCode::ill_posed,
            "q must be at least 1e-6 everywhere: the pure Neumann problem has no solution for a unit source");
    validate(mu, g);
    require_atom_margin(g, mu.locations());
    DiffusionOperator op(c);
    const auto f = hat_load(g, mu);
    std::vector<double> u(g.size(), 0.0);
    EllipticSolution sol;
    sol.cg_iterations = solve_pcg(op, f, u, opt, &sol.relative_residual);
    sol.u = ScalarField(c.grid);
    for (std::size_t n = 0; n < g.size(); ++n) {
        sol.u[n] = u[n];
        sol.mass_check += g.area_weight(n) * c.q[n].real() * u[n];
    }
    sol.boundary_trace = sol.u.boundary_trace();
    return sol;
}

std::vector<Complex> conormal_derivative(const ScalarField& v, const DiffusionOperator& op, FluxMode mode, Complex shift)
{
    if (mode == FluxMode::discrete) return op.conormal_flux(v.values(), shift);
    auto d = normal_derivative(v);
    const auto& b = op.grid().boundary();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] *= op.kappa(b[k].node);
    return d;
}

Complex functional_R(std::span<const Complex> u_trace, const ScalarField& v, const DiffusionOperator& op, FluxMode mode,
                     Complex shift)
{
    const auto& g = op.grid();
    require(v.size() == g.size(), ErrorCode::shape_mismatch, "test function does not live on the operator grid");
    require(u_trace.size() == g.boundary().size(), ErrorCode::shape_mismatch, "trace length differs from boundary size");
    auto flux = conormal_derivative(v, op, mode, shift);
    for (std::size_t k = 0; k < flux.size(); ++k) flux[k] *= u_trace[k];
    return boundary_integral(g, flux);
}

double check_reciprocity(const ScalarField& v, const AtomicMeasure& mu, const CoefficientSet& coeffs, FluxMode mode,
                         const CgOptions& opt)
{
    const auto sol = solve_forward(coeffs, mu, opt);
    DiffusionOperator op(coeffs);
    Complex atoms{};
    for (const auto& a : mu.atoms) atoms += a.a * v.at(a.s);
    return std::abs(functional_R(sol.boundary_trace, v, op, mode) - atoms);
}

void write_trace_csv(std::ostream& os, const Grid2D& grid, std::span<const Complex> trace)
{
    require(trace.size() == grid.boundary().size(), ErrorCode::shape_mismatch, "trace length differs from boundary size");
    os << "node,arc,value\n";
    char buf[128];
    for (std::size_t k = 0; k < trace.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", grid.boundary()[k].node, grid.boundary()[k].arc,
                      trace[k].real());
        os << buf;
    }
}

}  // namespace otstab
