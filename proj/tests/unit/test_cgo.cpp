#include "doctest.h"

#include <cmath>
#include <numbers>

#include "cgo/cgo.hpp"
#include "core/error.hpp"

using namespace otstab;

namespace {
const Rect shifted{{0.1, 0.1}, {1.1, 1.1}};

CoefficientSet coeffs(std::size_t n, const char* kappa, const char* q, Rect r = shifted)
{
    return make_coefficients(build_grid(n, n, r), Expression::parse(kappa), Expression::parse(q));
}

CMatrix random_matrix(Rng& rng, std::size_t n)
{
    CMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return a;
}
}  // namespace

TEST_CASE("make_rho")
{
    auto r = make_rho({1, 0}, 2);
    CHECK(r.a == Vec2{2, 0});
    CHECK(r.b == Vec2{0, 2});
    CHECK(std::abs(r.self_dot()) == 0.0);
    auto u = make_rho({0.6, 0.8}, 1);
    CHECK(norm(u.a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(norm(u.b) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(u.self_dot()) < 1e-15);
    CHECK_THROWS_AS(make_rho({0, 0}, 1), Error);
}

TEST_CASE("rtilde")
{
    CHECK(rtilde(2, 0.5, 0.5, 0, 1) == doctest::Approx(4 * (8 + std::sqrt(2.0))).epsilon(1e-14));
    CHECK(rtilde(1, std::numeric_limits<double>::infinity(), 1, 0, 1) == doctest::Approx(std::sqrt(2.0)));
    CHECK(rtilde(2, 0.5, 0.5, 2.0, 1) > rtilde(2, 0.5, 0.5, 1.0, 1));
    CHECK_THROWS_AS(rtilde(2, 0.0, 0.5, 0, 1), Error);
}

TEST_CASE("zero potential gives zero correction")
{
    auto g = build_grid(33, 33, shifted);
    CgoSolver s(g, [](Vec2) { return 0.0; }, ScalarField(g, 1.0));
    auto sol = s.solve(make_rho({0.5, 0.7}, 3));
    CHECK(sol.psi.max_abs() == 0.0);
    CHECK(sol.sup_psi == 0.0);
}

TEST_CASE("correction decays like 1/|rho|")
{
    auto g = build_grid(65, 65, Rect{{0, 0}, {1, 1}});
    const double pi = std::numbers::pi;
    CgoSolver s(g, [&](Vec2 x) { return 0.5 * std::sin(pi * x.x1) * std::sin(pi * x.x2); }, ScalarField(g, 1.0));
    std::vector<double> prod;
    for (double r : {5.0, 10.0, 20.0, 40.0}) {
        auto sol = s.solve(make_rho({0.6, 0.8}, r));
        prod.push_back(sol.rho.modulus() * sol.sup_psi);
    }
    const double hi = *std::max_element(prod.begin(), prod.end()), lo = *std::min_element(prod.begin(), prod.end());
    CHECK(lo > 0.0);
    CHECK(hi / lo <= 3.0);
}

TEST_CASE("constant potential, large rho: first iterate bound")
{
    auto g = build_grid(65, 65, Rect{{0, 0}, {1, 1}});
    const double c = 0.3;
    CgoSolver s(g, [&](Vec2) { return c; }, ScalarField(g, 1.0));
    auto sol = s.solve(make_rho({0.6, 0.8}, 200));
    CHECK(sol.sup_psi <= 2 * c / sol.rho.modulus());
}

TEST_CASE("too small rho is reported")
{
    auto g = build_grid(33, 33, Rect{{0, 0}, {1, 1}});
    CgoSolver s(g, [](Vec2) { return 200.0; }, ScalarField(g, 1.0));
    try {
        s.solve(make_rho({0.6, 0.8}, 0.05));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::rho_too_small);
    }
}

TEST_CASE("closed-form A for kappa = 1, q = 0")
{
    auto c = coeffs(41, "1", "0");
    // grid nodes, so bilinear evaluation is exact
    std::vector<Vec2> pts{c.grid->point(10, 12), c.grid->point(25, 8), c.grid->point(18, 30)};
    BasisOptions opt{RMode::given, 3.0, 1.0, false};
    auto B = build_basis(pts, c, opt);
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t j = 0; j < 3; ++j) {
            const Complex closed = std::exp(make_rho(pts[j], 3.0).dot_x(pts[l]));
            CHECK(std::abs(B.A(l, j) / closed - 1.0) < 1e-10);
        }
    CHECK(B.interpolation_error() <= 1e-8);

    std::vector<Vec2> one{c.grid->point(20, 20)};
    auto B1 = build_basis(one, c, opt);
    CHECK(std::abs(B1.A(0, 0)) == doctest::Approx(std::exp(3.0 * dot(one[0], one[0]))).epsilon(1e-12));
    CHECK(std::abs(B1.basis[0].at(one[0]) - 1.0) < 1e-14);

    std::vector<Vec2> dup{pts[0], pts[0]};
    CHECK_THROWS_AS(build_basis(dup, c, opt), Error);
}

TEST_CASE("n = 1 diagonal modulus with variable kappa")
{
    auto c = coeffs(65, "1 + 0.2*x1*x2", "1");
    std::vector<Vec2> one{{0.55, 0.7}};
    auto B = build_basis(one, c, BasisOptions{RMode::given, 4.0});
    const double kap = 1 + 0.2 * 0.55 * 0.7;
    const double expect = std::exp(4.0 * dot(one[0], one[0])) / kap;
    CHECK(std::abs(std::abs(B.A(0, 0)) / expect - 1.0) < 2e-2);
}

TEST_CASE("raw CGO basis: interpolation and the conditioning bound")
{
    auto c = coeffs(65, "1 + 0.1*sin(3*x1)*x2", "1 + 0.5*x1");
    std::vector<Vec2> pts{{0.3, 0.35}, {0.8, 0.4}, {0.55, 0.9}};
    BasisOptions raw;
    raw.discrete_lift = false;
    auto B = build_basis(pts, c, raw);
    CHECK(B.interpolation_error() <= 1e-8);
    CHECK(B.sigma_min > 0.0);
    CHECK(B.correction_measured < 0.05);
    if (B.beta_bound_measured > 0) CHECK(B.sigma_min >= B.beta_bound_measured);
    CHECK(B.r_used <= rtilde(3, B.eta1, B.eta2, c.qtilde_hp, 1.0));
    CHECK(B.r_used == doctest::Approx(precision_cap_r(pts, c.grid->rect())));

    // two far-apart points at a larger r give a positive bound
    std::vector<Vec2> far{{0.3, 0.3}, {1.0, 0.95}};
    auto cf = coeffs(129, "1", "1");
    BasisOptions given{RMode::given, 12.0, 1.0, false};
    auto F = build_basis(far, cf, given);
    CHECK(F.beta_bound_measured > 0.0);
    CHECK(F.sigma_min >= F.beta_bound_measured);
}

TEST_CASE("interpolation basis with the discrete lift")
{
    auto c = coeffs(65, "1 + 0.1*sin(3*x1)*x2", "1 + 0.5*x1");
    std::vector<Vec2> pts{{0.3, 0.35}, {0.8, 0.4}, {0.55, 0.9}};
    auto B = build_basis(pts, c, BasisOptions{});
    CHECK(B.interpolation_error() <= 1e-8);
    CHECK(B.sigma_min > 0.0);

    // lifted raw fields satisfy the interior discrete equations
    DiffusionOperator op(c);
    std::vector<Complex> out(c.grid->size());
    op.apply(B.basis[0].values(), out);
    double worst = 0;
    for (std::size_t n = 0; n < out.size(); ++n)
        if (!c.grid->on_boundary(c.grid->col(n), c.grid->row(n))) worst = std::max(worst, std::abs(out[n]));
    CHECK(worst < 1e-10 * B.basis[0].max_abs());
}

TEST_CASE("near-coincident points with tiny r are ill-conditioned")
{
    auto c = coeffs(33, "1", "1");
    std::vector<Vec2> pts{{0.5, 0.5}, {0.5, 0.5 + 1e-9}, {0.5, 0.5 + 2e-9}};
    try {
        build_basis(pts, c, BasisOptions{RMode::given, 1e-3});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ill_conditioned);
    }
}

TEST_CASE("mode k bases")
{
    auto c = coeffs(33, "1", "1 + 0.3*x2");
    std::vector<Vec2> pts{{0.3, 0.4}, {0.8, 0.7}};
    BasisOptions opt{RMode::given, 4.0};
    auto e = build_basis(pts, c, opt);
    auto b0 = build_basis_mode_k(pts, c, 0, 2, 0.5, opt);
    for (std::size_t n = 0; n < c.grid->size(); ++n) CHECK(std::abs(e.basis[1][n] - b0.basis[1][n]) == 0.0);
    auto bp = build_basis_mode_k(pts, c, 1, 2, 0.5, opt);
    auto bm = build_basis_mode_k(pts, c, -1, 2, 0.5, opt);
    for (std::size_t n = 0; n < c.grid->size(); ++n) CHECK(bm.basis[0][n] == std::conj(bp.basis[0][n]));
    CHECK(bp.interpolation_error() <= 1e-8);
    // v_k solves the shifted equation in the interior
    DiffusionOperator op(c);
    std::vector<Complex> out(c.grid->size());
    op.apply(bp.basis[0].values(), out, bp.shift);
    double worst = 0;
    for (std::size_t n = 0; n < out.size(); ++n)
        if (!c.grid->on_boundary(c.grid->col(n), c.grid->row(n))) worst = std::max(worst, std::abs(out[n]));
    CHECK(worst < 1e-10 * bp.basis[0].max_abs());
    CHECK_THROWS_AS(build_basis_mode_k(pts, c, 3, 2, 0.5, opt), Error);
}

TEST_CASE("time test function")
{
    auto c = coeffs(33, "1", "1");
    BasisOptions opt{RMode::given, 4.0};
    std::vector<Vec2> one{{0.6, 0.6}};
    std::vector<BandLimitedIntensity> h1{BandLimitedIntensity::constant(1.0, 0.5)};
    auto v1 = build_time_test_function(one, h1, c, 0.5, opt);
    CHECK(std::abs(v1.value(one[0], 0.1) - 1.0) < 1e-12);
    CHECK(std::abs(v1.value({0.3, 0.9}, 0.1) - v1.value({0.3, 0.9}, 0.4)) < 1e-14);

    std::vector<Vec2> pts{{0.3, 0.4}, {0.8, 0.7}};
    Rng rng(4);
    std::vector<BandLimitedIntensity> h;
    for (int j = 0; j < 2; ++j) {
        std::vector<double> s(40);
        for (auto& x : s) x = rng.uniform(-1, 1);
        h.push_back(project_GK(std::span<const double>(s), 2, 0.5));
    }
    auto v = build_time_test_function(pts, h, c, 0.5, opt);
    double worst = 0;
    for (int m = 0; m < 128; ++m) {
        const double t = 0.5 * m / 128;
        for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::abs(v.value(pts[j], t) - h[j](t)));
    }
    CHECK(worst <= 1e-6);
    CHECK(v.max_h1(8) > 0.0);

    auto empty = build_time_test_function(pts, h, c, 0.5, opt, -1);
    CHECK(empty.K == -1);
}

TEST_CASE("smallest singular value and the diagonal-dominance bound")
{
    CHECK(smallest_singular_value(CMatrix::identity(3)) == doctest::Approx(1.0));
    CMatrix d(2, 2);
    d(0, 0) = 3;
    d(1, 1) = 0.5;
    CHECK(smallest_singular_value(d) == doctest::Approx(0.5));
    CMatrix nil(2, 2);
    nil(0, 1) = 1;
    CHECK(smallest_singular_value(nil) == 0.0);
    CHECK(beta_lower_bound(CMatrix::identity(4)) == doctest::Approx(1.0));
    CMatrix t(2, 2);
    t(0, 0) = 2;
    t(1, 0) = 1;
    t(1, 1) = 1;
    CHECK(beta_lower_bound(t) == doctest::Approx(0.0));
}

TEST_CASE("singular value chain on random matrices")
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.next() % 7;
        auto A = random_matrix(rng, n);
        for (std::size_t i = 0; i < n; ++i) A(i, i) += Complex(rng.uniform(0, 4));
        auto B = random_matrix(rng, n);
        const double s = smallest_singular_value(A);
        CHECK(s >= beta_lower_bound(A) - 1e-12);
        CHECK(smallest_singular_value(A + B) >= s - norm2(B) - 1e-12);
        if (s > 1e-8) CHECK(std::abs(norm2(LuFactor(A).inverse()) * s - 1.0) <= 1e-10);
    }
}

TEST_CASE("C1 calibration is positive and finite")
{
    auto c = coeffs(33, "1 + 0.1*x1", "1");
    std::vector<double> rs{5, 10, 20};
    auto cal = calibrate_C1(c, {0.6, 0.8}, rs);
    CHECK(cal.C1 > 0.0);
    CHECK(std::isfinite(cal.C1));
    CHECK(cal.products.size() == 3);
}
