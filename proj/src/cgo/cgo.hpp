#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "core/dense.hpp"
#include "grid/grid.hpp"
#include "measures/measures.hpp"

namespace otstab {

/// rho = a + i b with a.a = b.b and a.b = 0, so rho.rho = 0.
struct RhoVector {
    Vec2 a, b;

    double modulus() const { return std::sqrt(dot(a, a) + dot(b, b)); }
    Complex dot_x(Vec2 x) const { return {dot(a, x), dot(b, x)}; }
    Complex self_dot() const { return {dot(a, a) - dot(b, b), 2.0 * dot(a, b)}; }
    RhoVector conj() const { return {a, {-b.x1, -b.x2}}; }
};

/// a = r s, b = r rot90(s).
RhoVector make_rho(Vec2 s, double r);

struct CGOSolution {
    RhoVector rho;
    ScalarField psi;   // correction on the grid
    ScalarField v;     // e^{rho.x}(1 + psi) / sqrt(kappa)
    double sup_psi = 0.0;
    int iterations = 0;
    double residual = 0.0;  // relative size of the last fixed-point update
};

/// Solves Lap psi + 2 rho.grad psi = qt (1 + psi) on a periodic box twice the
/// size of the grid, with qt = qtilde - extra_potential cut off smoothly
/// outside a margin around the domain.
class CgoSolver {
public:
    /// qtilde is rebuilt on the box from the coefficient expressions.
    explicit CgoSolver(const CoefficientSet& coeffs, Complex extra_potential = {});
    /// Box potential sampled from a callable (tests, constant potentials).
    template <class Fn>
    CgoSolver(GridPtr grid, Fn&& qtilde, const ScalarField& kappa)
        : CgoSolver(grid, sample_box(*grid, qtilde), kappa)
    {
    }
    /// Potential given directly on the box (row-major, x1 fastest), already cut off.
    CgoSolver(GridPtr grid, std::vector<Complex> qt_box, const ScalarField& kappa);
    ~CgoSolver();
    CgoSolver(CgoSolver&&) noexcept;

    CGOSolution solve(const RhoVector& rho) const;
    /// psi = 0: the bare exponential, used as boundary data when the
    /// fixed point does not contract and the field is lifted afterwards.
    CGOSolution uncorrected(const RhoVector& rho) const;

    std::size_t box_n0() const;
    std::size_t box_n1() const;
    const Grid2D& grid() const { return *grid_; }

    static Vec2 box_point(const Grid2D& g, std::size_t m0, std::size_t m1);
    /// Smooth cutoff: 1 within 0.1 L of the domain, 0 beyond 0.4 L.
    static double cutoff(const Grid2D& g, Vec2 x);

    template <class Fn>
    static std::vector<Complex> sample_box(const Grid2D& g, Fn&& qtilde)
    {
        const std::size_t n0 = 2 * (g.nx() - 1), n1 = 2 * (g.ny() - 1);
        std::vector<Complex> qt(n0 * n1);
        for (std::size_t m1 = 0; m1 < n1; ++m1)
            for (std::size_t m0 = 0; m0 < n0; ++m0) {
                const Vec2 x = box_point(g, m0, m1);
                const double chi = cutoff(g, x);
                if (chi > 0.0) qt[m1 * n0 + m0] = chi * Complex(qtilde(x));
            }
        return qt;
    }

private:
    void init_box(const std::vector<Complex>& qt_box);

    GridPtr grid_;
    ScalarField kappa_;
    struct Box;
    std::unique_ptr<Box> box_;
};

/// 2n (2/eta1^2 + (1 + C1 qnorm)/(sqrt2 eta2)); eta1 = inf drops the first term.
double rtilde(std::size_t n, double eta1, double eta2, double qnorm, double C1);

/// Largest r with e^{r (s_i.x - (|s_i|^2 + |s_l|^2)/2)} <= growth for every pair
/// of points and every x in the closed domain. Each raw field then stays within
/// `growth` of the geometric mean of any two diagonal entries, so round-off in
/// the equilibrated interpolation matrix is at most ~1e-16 growth.
double precision_cap_r(std::span<const Vec2> points, const Rect& domain, double growth = 1e6);

enum class RMode { auto_r, given, capped };

struct BasisOptions {
    RMode mode = RMode::capped;
    double r = 6.0;        // used in given mode
    double C1 = 1.0;
    bool discrete_lift = true;
    double growth = 1e6;  // capped mode budget
    // > 0: time-harmonic modes use the Crank-Nicolson frequency (2/dt) tan(omega dt/2)
    // so that exp(i omega t) V solves the discrete adjoint exactly on CN steps
    double time_step = 0.0;
};

struct InterpolationBasis {
    std::vector<Vec2> points;
    double r_used = 0.0;
    Complex shift{};             // i omega_k for time-harmonic modes
    CMatrix A;                   // a_lj = vt_j(s_l)
    CMatrix coef;                // v_i = sum_j coef_ij vt_j, coef = A^{-T}
    double sigma_min = 0.0;
    double norm_A = 0.0;
    double dominance_bound = 0.0;   // min|a_jj| - off-diagonal Frobenius norm
    double beta_bound_theory = 0.0;     // uses C1 |qtilde| / (sqrt2 r eta2)
    double beta_bound_measured = 0.0;  // uses the measured relative deviation of A from closed form
    double correction_measured = 0.0;
    double max_sup_psi = 0.0;
    std::size_t uncorrected = 0;  // fields built without a correction (lift mode only)
    double eta1 = 0.0, eta2 = 0.0;
    std::vector<ScalarField> raw;    // vt_j
    std::vector<ScalarField> basis;  // v_i

    double interpolation_error() const;
};

InterpolationBasis build_basis(std::span<const Vec2> points, const CoefficientSet& coeffs, const BasisOptions& opt);

/// Basis for -Lap v + (q - i omega_k) v = 0 with omega_k = 2 pi k / T*, kappa = 1.
/// Negative k is the complex conjugate of the basis for |k|.
InterpolationBasis build_basis_mode_k(std::span<const Vec2> points, const CoefficientSet& coeffs, int k, int K,
                                      double tstar, const BasisOptions& opt);

InterpolationBasis conjugate(const InterpolationBasis& b);

/// v(x,t) = sum_{|k|<=K} e_k(t) V_k(x), with V_k = sum_j c_{k,j} v_{k,j}.
struct TimeTestFunction {
    int K = -1;
    double tstar = 1.0;
    std::vector<ScalarField> modes;  // index k + K
    std::vector<InterpolationBasis> bases;
    GridPtr grid;

    double omega(int k) const;
    /// Real part of the trigonometric sum at time t.
    ScalarField at(double t) const;
    Complex value(Vec2 x, double t) const;
    double max_h1(std::size_t samples = 64) const;
};

TimeTestFunction build_time_test_function(std::span<const Vec2> points, std::span<const BandLimitedIntensity> h,
                                          const CoefficientSet& coeffs, double tstar, const BasisOptions& opt,
                                          int K_override = -2);

/// max over |rho| in the sweep of |rho| sup_psi / |qtilde|_hp for the given direction.
struct C1Calibration {
    std::vector<double> moduli, sup_psi, products;
    double C1 = 0.0;
};
C1Calibration calibrate_C1(const CoefficientSet& coeffs, Vec2 direction, std::span<const double> r_values);

}  // namespace otstab
