#include "doctest.h"

#include <cmath>
#include <sstream>

#include "cgo/cgo.hpp"
#include "core/error.hpp"
#include "elliptic/elliptic.hpp"

using namespace otstab;

namespace {
const Rect unit{{0, 0}, {1, 1}};

CoefficientSet coeffs(std::size_t n, const char* kappa, const char* q, Rect r = unit)
{
    return make_coefficients(build_grid(n, n, r), Expression::parse(kappa), Expression::parse(q));
}

AtomicMeasure centre() { return AtomicMeasure{{{{0.5, 0.5}, 1.0}}}; }

double reciprocity_error(std::size_t cells, FluxMode mode)
{
    auto c = coeffs(cells + 1, "1", "1");
    auto v = ScalarField::sample(c.grid, [](Vec2 x) { return Complex(std::exp(x.x1)); });
    auto sol = solve_forward(c, centre());
    DiffusionOperator op(c);
    return std::abs(functional_R(sol.boundary_trace, v, op, mode) - std::exp(0.5));
}
}  // namespace

TEST_CASE("hat load has unit mass and hits the four corners of the cell")
{
    auto g = build_grid(11, 11, unit);
    AtomicMeasure mu{{{{0.33, 0.47}, 0.25}, {{0.5, 0.5}, 0.75}}};
    auto f = hat_load(*g, mu);
    double s = 0;
    int nz = 0;
    for (double x : f) {
        s += x;
        nz += x != 0.0;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(nz == 5);
}

TEST_CASE("mass identity at 128 cells")
{
    auto c = coeffs(129, "1 + 0.5*x1*x2", "1 + x1");
    AtomicMeasure mu{{{{0.3, 0.4}, 0.6}, {{0.71, 0.62}, 0.4}}};
    auto sol = solve_forward(c, mu);
    CHECK(std::abs(sol.mass_check - 1.0) <= 2e-3);
    CHECK(sol.relative_residual <= 1e-10);
    CHECK(sol.boundary_trace.size() == c.grid->boundary().size());
    // positivity of the Green's function
    for (std::size_t n = 0; n < c.grid->size(); ++n) CHECK(sol.u[n].real() > 0);
}

TEST_CASE("reciprocity for exp(x1) converges with at least first order")
{
    for (FluxMode mode : {FluxMode::discrete, FluxMode::finite_difference}) {
        const double e64 = reciprocity_error(64, mode), e128 = reciprocity_error(128, mode),
                     e256 = reciprocity_error(256, mode);
        CAPTURE(e64);
        CAPTURE(e128);
        CAPTURE(e256);
        CHECK(e256 <= 0.02 * std::exp(0.5));
        // the one-sided option sees the O(h) boundary error of the vertex-centred trace
        const double min_order = mode == FluxMode::discrete ? 1.0 : 0.95;
        CHECK(std::log2(e64 / e128) >= min_order);
        CHECK(std::log2(e128 / e256) >= min_order);
    }
}

TEST_CASE("vanishing potential is ill-posed")
{
    auto c = coeffs(33, "1", "0");
    try {
        solve_forward(c, centre());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ill_posed);
    }
}

TEST_CASE("atoms near the boundary are rejected")
{
    auto c = coeffs(33, "1", "1");
    AtomicMeasure mu{{{{0.04, 0.5}, 1.0}}};
    try {
        solve_forward(c, mu);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::margin);
    }
}

TEST_CASE("discrete reciprocity is exact for lifted CGO test functions")
{
    auto c = coeffs(65, "1", "1 + 0.3*sin(3*x1)*cos(2*x2)", {{0.1, 0.1}, {1.1, 1.1}});
    std::vector<Vec2> pts{{0.4, 0.5}, {0.75, 0.7}, {0.6, 0.3}};
    BasisOptions opt;
    auto basis = build_basis(pts, c, opt);
    AtomicMeasure mu{{{pts[0], 0.5}, {pts[1], 0.3}, {pts[2], 0.2}}};
    auto sol = solve_forward(c, mu);
    DiffusionOperator op(c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Complex R = functional_R(sol.boundary_trace, basis.basis[i], op);
        Complex atoms{};
        for (const auto& a : mu.atoms) atoms += a.a * basis.basis[i].at(a.s);
        CHECK(std::abs(R - atoms) <= 1e-6 * (1 + std::abs(atoms)));
        CHECK(std::abs(R - mu.atoms[i].a) <= 1e-3);
    }
}

TEST_CASE("trace csv")
{
    auto g = build_grid(8, 8, unit);
    std::vector<Complex> t(g->boundary().size(), 0.5);
    std::ostringstream os;
    write_trace_csv(os, *g, t);
    const auto s = os.str();
    CHECK(s.rfind("node,arc,value\n", 0) == 0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 29);
}
