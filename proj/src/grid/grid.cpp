#include "grid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "core/error.hpp"

namespace otstab {

double norm(Vec2 a) { return std::hypot(a.x1, a.x2); }

GridPtr build_grid(std::size_t nx, std::size_t ny, const Rect& rect)
{
    require(nx >= 8 && ny >= 8, ErrorCode::invalid_geometry, "grid needs at least 8 nodes per axis");
    const double ex = rect.hi.x1 - rect.lo.x1, ey = rect.hi.x2 - rect.lo.x2;
    require(std::isfinite(ex) && std::isfinite(ey) && ex > 0.0 && ey > 0.0, ErrorCode::invalid_geometry,
            "degenerate rectangle");

    auto g = std::shared_ptr<Grid2D>(new Grid2D());
    g->nx_ = nx;
    g->ny_ = ny;
    g->rect_ = rect;
    g->hx_ = ex / static_cast<double>(nx - 1);
    g->hy_ = ey / static_cast<double>(ny - 1);

    const double hx = g->hx_, hy = g->hy_;
    const double d = 1.0 / std::numbers::sqrt2;
    auto& b = g->boundary_;
    b.reserve(2 * (nx - 1) + 2 * (ny - 1));
    double arc = 0.0;
    // Counter-clockwise from the lower-left corner.
    for (std::size_t i = 0; i + 1 < nx; ++i) {
        const Vec2 n = i == 0 ? Vec2{-d, -d} : Vec2{0.0, -1.0};
        const double w = i == 0 ? 0.5 * (hx + hy) : hx;
        b.push_back({g->index(i, 0), n, w, arc});
        arc += hx;
    }
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        const Vec2 n = j == 0 ? Vec2{d, -d} : Vec2{1.0, 0.0};
        const double w = j == 0 ? 0.5 * (hx + hy) : hy;
        b.push_back({g->index(nx - 1, j), n, w, arc});
        arc += hy;
    }
    for (std::size_t i = nx - 1; i > 0; --i) {
        const Vec2 n = i == nx - 1 ? Vec2{d, d} : Vec2{0.0, 1.0};
        const double w = i == nx - 1 ? 0.5 * (hx + hy) : hx;
        b.push_back({g->index(i, ny - 1), n, w, arc});
        arc += hx;
    }
    for (std::size_t j = ny - 1; j > 0; --j) {
        const Vec2 n = j == ny - 1 ? Vec2{-d, d} : Vec2{-1.0, 0.0};
        const double w = j == ny - 1 ? 0.5 * (hx + hy) : hy;
        b.push_back({g->index(0, j), n, w, arc});
        arc += hy;
    }
    return g;
}

double Grid2D::area_weight(std::size_t node) const noexcept
{
    const std::size_t i = col(node), j = row(node);
    double w = hx_ * hy_;
    if (i == 0 || i + 1 == nx_) w *= 0.5;
    if (j == 0 || j + 1 == ny_) w *= 0.5;
    return w;
}

bool Grid2D::contains(Vec2 p) const noexcept
{
    return p.x1 >= rect_.lo.x1 && p.x1 <= rect_.hi.x1 && p.x2 >= rect_.lo.x2 && p.x2 <= rect_.hi.x2;
}

double Grid2D::max_radius() const noexcept
{
    const double ax = std::max(std::abs(rect_.lo.x1), std::abs(rect_.hi.x1));
    const double ay = std::max(std::abs(rect_.lo.x2), std::abs(rect_.hi.x2));
    return std::hypot(ax, ay);
}

// ---------------------------------------------------------------------------

ScalarField::ScalarField(GridPtr grid, Complex fill) : grid_(std::move(grid)), values_(grid_->size(), fill) {}

ScalarField::ScalarField(GridPtr grid, std::vector<Complex> values) : grid_(std::move(grid)), values_(std::move(values))
{
    require(values_.size() == grid_->size(), ErrorCode::shape_mismatch, "field value count differs from node count");
}

std::array<std::pair<std::size_t, double>, 4> hat_weights(const Grid2D& g, Vec2 p)
{
    require(g.contains(p), ErrorCode::invalid_argument, "point outside the grid rectangle");
    const double fx = (p.x1 - g.origin().x1) / g.hx();
    const double fy = (p.x2 - g.origin().x2) / g.hy();
    std::size_t i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(fx))), g.nx() - 2);
    std::size_t j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(fy))), g.ny() - 2);
    const double tx = fx - static_cast<double>(i), ty = fy - static_cast<double>(j);
    return {{{g.index(i, j), (1 - tx) * (1 - ty)},
             {g.index(i + 1, j), tx * (1 - ty)},
             {g.index(i, j + 1), (1 - tx) * ty},
             {g.index(i + 1, j + 1), tx * ty}}};
}

Complex ScalarField::at(Vec2 p) const
{
    Complex s{};
    for (const auto& [node, w] : hat_weights(*grid_, p)) s += w * values_[node];
    return s;
}

std::vector<Complex> ScalarField::boundary_trace() const
{
    std::vector<Complex> t;
    t.reserve(grid_->boundary().size());
    for (const auto& b : grid_->boundary()) t.push_back(values_[b.node]);
    return t;
}

double ScalarField::max_abs() const
{
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, std::abs(v));
    return m;
}

ScalarField& ScalarField::operator+=(const ScalarField& o)
{
    require(o.size() == size(), ErrorCode::shape_mismatch, "field size mismatch");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o)
{
    require(o.size() == size(), ErrorCode::shape_mismatch, "field size mismatch");
    for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
    return *this;
}

ScalarField& ScalarField::operator*=(Complex s)
{
    for (auto& v : values_) v *= s;
    return *this;
}

// ---------------------------------------------------------------------------

Complex boundary_integral(const Grid2D& grid, std::span<const Complex> trace)
{
    const auto& b = grid.boundary();
    require(trace.size() == b.size(), ErrorCode::shape_mismatch, "boundary trace length differs from boundary node count");
    Complex s{};
    for (std::size_t k = 0; k < b.size(); ++k) s += trace[k] * b[k].weight;
    return s;
}

double boundary_l2(const Grid2D& grid, std::span<const Complex> trace)
{
    const auto& b = grid.boundary();
    require(trace.size() == b.size(), ErrorCode::shape_mismatch, "boundary trace length differs from boundary node count");
    double s = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) s += std::norm(trace[k]) * b[k].weight;
    return std::sqrt(s);
}

Complex area_integral(const ScalarField& f)
{
    const auto& g = f.grid();
    Complex s{};
    for (std::size_t n = 0; n < g.size(); ++n) s += g.area_weight(n) * f[n];
    return s;
}

double l2_norm(const ScalarField& f)
{
    const auto& g = f.grid();
    double s = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n) s += g.area_weight(n) * std::norm(f[n]);
    return std::sqrt(s);
}

double h1_norm(const ScalarField& f)
{
    const auto& g = f.grid();
    double grad = 0.0;
    const double cell = g.hx() * g.hy();
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
            const double w = (j == 0 || j + 1 == g.ny()) ? 0.5 : 1.0;
            grad += w * cell * std::norm((f[g.index(i + 1, j)] - f[g.index(i, j)]) / g.hx());
        }
    for (std::size_t j = 0; j + 1 < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double w = (i == 0 || i + 1 == g.nx()) ? 0.5 : 1.0;
            grad += w * cell * std::norm((f[g.index(i, j + 1)] - f[g.index(i, j)]) / g.hy());
        }
    const double l2 = l2_norm(f);
    return std::sqrt(l2 * l2 + grad);
}

namespace {

// d/dx at (i,j): central inside, second-order one-sided at the ends.
Complex ddx(const ScalarField& f, std::size_t i, std::size_t j)
{
    const auto& g = f.grid();
    const double h = g.hx();
    const auto v = [&](std::size_t ii) { return f[g.index(ii, j)]; };
    if (i == 0) return (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
    if (i + 1 == g.nx()) return (3.0 * v(i) - 4.0 * v(i - 1) + v(i - 2)) / (2.0 * h);
    return (v(i + 1) - v(i - 1)) / (2.0 * h);
}

Complex ddy(const ScalarField& f, std::size_t i, std::size_t j)
{
    const auto& g = f.grid();
    const double h = g.hy();
    const auto v = [&](std::size_t jj) { return f[g.index(i, jj)]; };
    if (j == 0) return (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
    if (j + 1 == g.ny()) return (3.0 * v(j) - 4.0 * v(j - 1) + v(j - 2)) / (2.0 * h);
    return (v(j + 1) - v(j - 1)) / (2.0 * h);
}

}  // namespace

std::vector<Complex> normal_derivative(const ScalarField& f)
{
    const auto& g = f.grid();
    std::vector<Complex> out;
    out.reserve(g.boundary().size());
    for (const auto& b : g.boundary()) {
        const std::size_t i = g.col(b.node), j = g.row(b.node);
        Complex d{};
        if (b.normal.x1 != 0.0) d += b.normal.x1 * ddx(f, i, j);
        if (b.normal.x2 != 0.0) d += b.normal.x2 * ddy(f, i, j);
        out.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------

ScalarField compute_qtilde(const ScalarField& kappa, const ScalarField& q)
{
    const auto& g = kappa.grid();
    require(q.size() == kappa.size(), ErrorCode::shape_mismatch, "kappa and q live on different grids");
    std::vector<double> root(g.size());
    for (std::size_t n = 0; n < g.size(); ++n) {
        const double k = kappa[n].real();
        require(k > 0.0, ErrorCode::invalid_argument, "kappa must be strictly positive");
        root[n] = std::sqrt(k);
    }
    const auto second = [](double a, double b, double c, double h) { return (a - 2.0 * b + c) / (h * h); };
    ScalarField out(kappa.grid_ptr());
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const auto r = [&](std::size_t ii, std::size_t jj) { return root[g.index(ii, jj)]; };
            double lap;
            if (i == 0) lap = second(r(0, j), r(1, j), r(2, j), g.hx());
            else if (i + 1 == g.nx()) lap = second(r(i, j), r(i - 1, j), r(i - 2, j), g.hx());
            else lap = second(r(i - 1, j), r(i, j), r(i + 1, j), g.hx());
            if (j == 0) lap += second(r(i, 0), r(i, 1), r(i, 2), g.hy());
            else if (j + 1 == g.ny()) lap += second(r(i, j), r(i, j - 1), r(i, j - 2), g.hy());
            else lap += second(r(i, j - 1), r(i, j), r(i, j + 1), g.hy());
            const std::size_t n = g.index(i, j);
            out[n] = q[n] / kappa[n] + lap / r(i, j);
        }
    return out;
}

double hp_surrogate(const ScalarField& f, int p)
{
    const auto& g = f.grid();
    const double cell = g.hx() * g.hy();
    const double l2 = l2_norm(f);
    double total = l2 * l2;
    for (int a1 = 0; a1 <= p; ++a1)
        for (int a2 = 0; a1 + a2 <= p; ++a2) {
            if (a1 + a2 == 0) continue;
            std::size_t mx = g.nx(), my = g.ny();
            std::vector<Complex> d(f.values().begin(), f.values().end());
            // forward differences shrink the active block; keep the row stride nx
            for (int k = 0; k < a1; ++k) {
                for (std::size_t j = 0; j < my; ++j)
                    for (std::size_t i = 0; i + 1 < mx; ++i)
                        d[j * g.nx() + i] = (d[j * g.nx() + i + 1] - d[j * g.nx() + i]) / g.hx();
                --mx;
            }
            for (int k = 0; k < a2; ++k) {
                for (std::size_t j = 0; j + 1 < my; ++j)
                    for (std::size_t i = 0; i < mx; ++i)
                        d[j * g.nx() + i] = (d[(j + 1) * g.nx() + i] - d[j * g.nx() + i]) / g.hy();
                --my;
            }
            for (std::size_t j = 0; j < my; ++j)
                for (std::size_t i = 0; i < mx; ++i) total += cell * std::norm(d[j * g.nx() + i]);
        }
    return std::sqrt(total);
}

CoefficientSet make_coefficients(GridPtr grid, const Expression& kappa, const Expression& q, int sobolev_p)
{
    CoefficientSet c;
    c.grid = grid;
    c.kappa_expr = kappa;
    c.q_expr = q;
    c.sobolev_p = sobolev_p;
    c.kappa = ScalarField::sample(grid, [&](Vec2 x) { return Complex(kappa(x.x1, x.x2)); });
    c.q = ScalarField::sample(grid, [&](Vec2 x) { return Complex(q(x.x1, x.x2)); });
    c.kappa_min = std::numeric_limits<double>::infinity();
    c.q_min = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < grid->size(); ++n) {
        const double k = c.kappa[n].real(), qq = c.q[n].real();
        require(std::isfinite(k) && std::isfinite(qq), ErrorCode::invalid_config, "coefficient expression is not finite on the grid");
        c.kappa_min = std::min(c.kappa_min, k);
        c.kappa_c0 = std::max(c.kappa_c0, std::abs(k));
        c.q_min = std::min(c.q_min, qq);
    }
    require(c.kappa_min > 0.0, ErrorCode::invalid_argument, "kappa must be strictly positive on the grid");
    c.qtilde = compute_qtilde(c.kappa, c.q);
    c.qtilde_hp = hp_surrogate(c.qtilde, sobolev_p);
    return c;
}

// ---------------------------------------------------------------------------

DiffusionOperator::DiffusionOperator(GridPtr grid, const ScalarField& kappa, const ScalarField& q)
    : grid_(std::move(grid)), kappa_(grid_->size()), q_(grid_->size()), weight_(grid_->size())
{
    require(kappa.size() == grid_->size() && q.size() == grid_->size(), ErrorCode::shape_mismatch,
            "coefficient fields do not match the grid");
    for (std::size_t n = 0; n < grid_->size(); ++n) {
        kappa_[n] = kappa[n].real();
        q_[n] = q[n].real();
        weight_[n] = grid_->area_weight(n);
    }
}

double DiffusionOperator::tx(std::size_t i, std::size_t j) const
{
    const auto& g = *grid_;
    const double ke = 0.5 * (kappa_[g.index(i, j)] + kappa_[g.index(i + 1, j)]);
    const double half = (j == 0 || j + 1 == g.ny()) ? 0.5 : 1.0;
    return half * ke * g.hy() / g.hx();
}

double DiffusionOperator::ty(std::size_t i, std::size_t j) const
{
    const auto& g = *grid_;
    const double ke = 0.5 * (kappa_[g.index(i, j)] + kappa_[g.index(i, j + 1)]);
    const double half = (i == 0 || i + 1 == g.nx()) ? 0.5 : 1.0;
    return half * ke * g.hx() / g.hy();
}

double DiffusionOperator::stiffness(std::size_t a, std::size_t b) const
{
    const auto& g = *grid_;
    const std::size_t ia = g.col(a), ja = g.row(a);
    if (a == b) {
        double s = 0.0;
        if (ia > 0) s += tx(ia - 1, ja);
        if (ia + 1 < g.nx()) s += tx(ia, ja);
        if (ja > 0) s += ty(ia, ja - 1);
        if (ja + 1 < g.ny()) s += ty(ia, ja);
        return s;
    }
    const std::size_t ib = g.col(b), jb = g.row(b);
    if (ja == jb && ib == ia + 1) return -tx(ia, ja);
    if (ja == jb && ia == ib + 1) return -tx(ib, ja);
    if (ia == ib && jb == ja + 1) return -ty(ia, ja);
    if (ia == ib && ja == jb + 1) return -ty(ia, jb);
    return 0.0;
}

double DiffusionOperator::diagonal(std::size_t node) const { return stiffness(node, node) + weight_[node] * q_[node]; }

namespace {
template <class T, class S>
void apply_impl(const Grid2D& g, const std::vector<double>& w, const std::vector<double>& q, std::span<const T> u,
                std::span<T> out, S shift, const auto& tx, const auto& ty)
{
    require(u.size() == g.size() && out.size() == g.size(), ErrorCode::shape_mismatch, "operator size mismatch");
    for (std::size_t n = 0; n < g.size(); ++n) out[n] = w[n] * (q[n] - shift) * u[n];
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i + 1 < g.nx(); ++i) {
            const std::size_t a = g.index(i, j), b = a + 1;
            const T flux = tx(i, j) * (u[a] - u[b]);
            out[a] += flux;
            out[b] -= flux;
        }
    for (std::size_t j = 0; j + 1 < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t a = g.index(i, j), b = a + g.nx();
            const T flux = ty(i, j) * (u[a] - u[b]);
            out[a] += flux;
            out[b] -= flux;
        }
}
}  // namespace

void DiffusionOperator::apply(std::span<const Complex> u, std::span<Complex> out, Complex shift) const
{
    apply_impl<Complex, Complex>(*grid_, weight_, q_, u, out, shift,
                                 [this](std::size_t i, std::size_t j) { return tx(i, j); },
                                 [this](std::size_t i, std::size_t j) { return ty(i, j); });
}

void DiffusionOperator::apply(std::span<const double> u, std::span<double> out) const
{
    apply_impl<double, double>(*grid_, weight_, q_, u, out, 0.0,
                               [this](std::size_t i, std::size_t j) { return tx(i, j); },
                               [this](std::size_t i, std::size_t j) { return ty(i, j); });
}

std::vector<Complex> DiffusionOperator::conormal_flux(std::span<const Complex> v, Complex shift) const
{
    std::vector<Complex> full(grid_->size());
    apply(v, full, shift);
    std::vector<Complex> out;
    out.reserve(grid_->boundary().size());
    for (const auto& b : grid_->boundary()) out.push_back(full[b.node] / b.weight);
    return out;
}

// ---------------------------------------------------------------------------

DirichletLift::DirichletLift(const DiffusionOperator& op, Complex shift) : op_(&op), shift_(shift)
{
    const auto& g = op.grid();
    interior_index_.assign(g.size(), -1);
    std::vector<std::size_t> nodes;
    for (std::size_t j = 1; j + 1 < g.ny(); ++j)
        for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
            interior_index_[g.index(i, j)] = static_cast<std::ptrdiff_t>(nodes.size());
            nodes.push_back(g.index(i, j));
        }
    const std::size_t mx = g.nx() - 2;
    factor_ = std::make_shared<BandedLdlt<Complex>>(nodes.size(), mx, [&](std::size_t r, std::size_t c) -> Complex {
        if (r == c) return op.diagonal(nodes[r]) - op.mass(nodes[r]) * shift;
        return op.stiffness(nodes[r], nodes[c]);
    });
}

ScalarField DirichletLift::lift(const ScalarField& data) const
{
    const auto& g = op_->grid();
    require(data.size() == g.size(), ErrorCode::shape_mismatch, "lift data does not match the grid");
    std::vector<Complex> rhs(factor_->size());
    for (std::size_t j = 1; j + 1 < g.ny(); ++j)
        for (std::size_t i = 1; i + 1 < g.nx(); ++i) {
            const std::size_t n = g.index(i, j);
            Complex s{};
            const std::size_t nb[4] = {n - 1, n + 1, n - g.nx(), n + g.nx()};
            for (std::size_t m : nb)
                if (interior_index_[m] < 0) s -= op_->stiffness(n, m) * data[m];
            rhs[static_cast<std::size_t>(interior_index_[n])] = s;
        }
    factor_->solve_in_place(std::span<Complex>(rhs));
    ScalarField out = data;
    for (std::size_t n = 0; n < g.size(); ++n)
        if (interior_index_[n] >= 0) out[n] = rhs[static_cast<std::size_t>(interior_index_[n])];
    return out;
}

// ---------------------------------------------------------------------------

SeparationParams separation_params(std::span<const Vec2> points, const Grid2D& grid)
{
    require(!points.empty(), ErrorCode::invalid_argument, "separation_params needs at least one point");
    SeparationParams sp{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                        grid.max_radius()};
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(grid.contains(points[i]), ErrorCode::invalid_argument, "point outside the domain");
        sp.eta2 = std::min(sp.eta2, norm(points[i]));
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            const double d = norm(points[i] - points[j]);
            require(d > 0.0, ErrorCode::duplicate_point, "coincident points");
            sp.eta1 = std::min(sp.eta1, d);
        }
    }
    require(sp.eta2 > 0.0, ErrorCode::origin_degeneracy, "a point sits at the coordinate origin (eta2 = 0)");
    return sp;
}

}  // namespace otstab
