#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "core/banded.hpp"
#include "core/expr.hpp"

namespace otstab {

using Complex = std::complex<double>;

struct Vec2 {
    double x1 = 0.0, x2 = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x1, s * a.x2}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
double norm(Vec2 a);

struct Rect {
    Vec2 lo, hi;
};

struct BoundaryNode {
    std::size_t node;  // flat node index
    Vec2 normal;       // outward unit normal (diagonal at corners)
    double weight;     // arc-length quadrature weight
    double arc;        // arc-length coordinate, counter-clockwise from lo
};

class Grid2D;
using GridPtr = std::shared_ptr<const Grid2D>;

/// Uniform node grid on an axis-aligned rectangle. Nodes are numbered
/// row-major with x1 fastest: index = j * nx + i.
class Grid2D {
public:
    std::size_t nx() const noexcept { return nx_; }
    std::size_t ny() const noexcept { return ny_; }
    std::size_t size() const noexcept { return nx_ * ny_; }
    Vec2 origin() const noexcept { return rect_.lo; }
    Vec2 extent() const noexcept { return rect_.hi - rect_.lo; }
    const Rect& rect() const noexcept { return rect_; }
    double hx() const noexcept { return hx_; }
    double hy() const noexcept { return hy_; }
    double perimeter() const noexcept { return 2.0 * (extent().x1 + extent().x2); }
    double area() const noexcept { return extent().x1 * extent().x2; }

    std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx_ + i; }
    std::size_t col(std::size_t node) const noexcept { return node % nx_; }
    std::size_t row(std::size_t node) const noexcept { return node / nx_; }
    Vec2 point(std::size_t i, std::size_t j) const noexcept
    {
        return {rect_.lo.x1 + hx_ * static_cast<double>(i), rect_.lo.x2 + hy_ * static_cast<double>(j)};
    }
    Vec2 point(std::size_t node) const noexcept { return point(col(node), row(node)); }
    bool on_boundary(std::size_t i, std::size_t j) const noexcept
    {
        return i == 0 || j == 0 || i + 1 == nx_ || j + 1 == ny_;
    }

    /// Trapezoid (control-volume) area weight of a node.
    double area_weight(std::size_t node) const noexcept;
    const std::vector<BoundaryNode>& boundary() const noexcept { return boundary_; }

    bool contains(Vec2 p) const noexcept;
    /// max over the closed rectangle of |x|.
    double max_radius() const noexcept;

    friend GridPtr build_grid(std::size_t nx, std::size_t ny, const Rect& rect);

private:
    Grid2D() = default;
    std::size_t nx_ = 0, ny_ = 0;
    Rect rect_;
    double hx_ = 0.0, hy_ = 0.0;
    std::vector<BoundaryNode> boundary_;
};

/// nx, ny >= 8 and a non-degenerate rectangle, otherwise invalid-geometry.
GridPtr build_grid(std::size_t nx, std::size_t ny, const Rect& rect);

/// Nodal samples of a (complex) field on a grid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(GridPtr grid, Complex fill = {});
    ScalarField(GridPtr grid, std::vector<Complex> values);

    template <class Fn>
    static ScalarField sample(GridPtr grid, Fn&& fn)
    {
        ScalarField f(grid);
        for (std::size_t n = 0; n < grid->size(); ++n) f.values_[n] = fn(grid->point(n));
        return f;
    }

    const Grid2D& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    Complex& operator[](std::size_t n) { return values_[n]; }
    const Complex& operator[](std::size_t n) const { return values_[n]; }
    std::span<Complex> values() noexcept { return values_; }
    std::span<const Complex> values() const noexcept { return values_; }

    /// Bilinear interpolation at a point of the closed rectangle.
    Complex at(Vec2 p) const;
    std::vector<Complex> boundary_trace() const;
    double max_abs() const;

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(Complex s);
    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(Complex s, ScalarField a) { return a *= s; }

private:
    GridPtr grid_;
    std::vector<Complex> values_;
};

/// The four (node, weight) pairs of the bilinear hat basis at p; weights sum to 1.
std::array<std::pair<std::size_t, double>, 4> hat_weights(const Grid2D& grid, Vec2 p);

/// sum_i g_i w_i over boundary nodes.
Complex boundary_integral(const Grid2D& grid, std::span<const Complex> trace);

/// |g|_{L2(boundary)}.
double boundary_l2(const Grid2D& grid, std::span<const Complex> trace);

/// Area-weighted integral and L2 norm.
Complex area_integral(const ScalarField& f);
double l2_norm(const ScalarField& f);
/// Discrete H1 norm: L2 of the field plus forward-difference gradient.
double h1_norm(const ScalarField& f);

/// grad f . n at each boundary node with second-order one-sided differences.
std::vector<Complex> normal_derivative(const ScalarField& f);

/// Coefficients of -div(kappa grad u) + q u on a grid.
struct CoefficientSet {
    GridPtr grid;
    Expression kappa_expr, q_expr;
    ScalarField kappa, q, qtilde;
    double kappa_c0 = 0.0;     // max kappa
    double kappa_min = 0.0;
    double q_min = 0.0;
    double qtilde_hp = 0.0;    // discrete H^p surrogate of qtilde
    int sobolev_p = 3;
};

CoefficientSet make_coefficients(GridPtr grid, const Expression& kappa, const Expression& q, int sobolev_p = 3);

/// qtilde = q/kappa + Lap(sqrt kappa)/sqrt(kappa) with a 5-point Laplacian
/// (one-sided second differences on the boundary).
ScalarField compute_qtilde(const ScalarField& kappa, const ScalarField& q);

/// l2 norm of f and all discrete partial derivatives of order <= p.
double hp_surrogate(const ScalarField& f, int p);

/// Vertex-centred, symmetric discretization of -div(kappa grad .) + q with
/// homogeneous Neumann closure. apply() returns (K + W diag(q - shift)) u,
/// i.e. area-weighted: interior rows are h1*h2 times the pointwise operator.
class DiffusionOperator {
public:
    DiffusionOperator(GridPtr grid, const ScalarField& kappa, const ScalarField& q);
    explicit DiffusionOperator(const CoefficientSet& c) : DiffusionOperator(c.grid, c.kappa, c.q) {}

    const Grid2D& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }

    void apply(std::span<const Complex> u, std::span<Complex> out, Complex shift = {}) const;
    void apply(std::span<const double> u, std::span<double> out) const;

    /// Stiffness entry K(a, b) for neighbouring or equal nodes.
    double stiffness(std::size_t a, std::size_t b) const;
    double mass(std::size_t node) const { return weight_[node]; }
    double reaction(std::size_t node) const { return q_[node]; }
    double kappa(std::size_t node) const { return kappa_[node]; }
    /// Diagonal of K + W q.
    double diagonal(std::size_t node) const;

    /// Discrete conormal flux kappa d_n v at boundary nodes: rows of
    /// (K + W(q - shift)) v divided by the arc-length weight.
    std::vector<Complex> conormal_flux(std::span<const Complex> v, Complex shift = {}) const;

private:
    double tx(std::size_t i, std::size_t j) const;  // edge (i,j)-(i+1,j)
    double ty(std::size_t i, std::size_t j) const;  // edge (i,j)-(i,j+1)

    GridPtr grid_;
    std::vector<double> kappa_, q_, weight_;
};

/// Solves the interior rows of (K + W(q - shift)) v = 0 with v fixed on the
/// boundary, i.e. the discrete harmonic lift of boundary data. One banded
/// factorization is shared by all lifts with the same shift.
class DirichletLift {
public:
    DirichletLift(const DiffusionOperator& op, Complex shift);
    ScalarField lift(const ScalarField& boundary_data) const;
    Complex shift() const noexcept { return shift_; }

private:
    const DiffusionOperator* op_;
    Complex shift_;
    std::vector<std::ptrdiff_t> interior_index_;  // node -> unknown, -1 on the boundary
    std::shared_ptr<const BandedLdlt<Complex>> factor_;
};

struct SeparationParams {
    double eta1;  // min pairwise distance; +inf for a single point
    double eta2;  // min |s|
    double R0;    // max over the closed domain of |x|
};

/// Errors: duplicate-point for coincident points, origin-degeneracy for eta2 = 0,
/// invalid-argument for an empty list or a point outside the domain.
SeparationParams separation_params(std::span<const Vec2> points, const Grid2D& grid);

}  // namespace otstab
