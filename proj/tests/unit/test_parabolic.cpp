#include "doctest.h"

#include <cmath>
#include <sstream>

#include "core/error.hpp"
#include "parabolic/parabolic.hpp"

using namespace otstab;

namespace {
const Rect unit{{0, 0}, {1, 1}};
const Rect shifted{{0.1, 0.1}, {1.1, 1.1}};

CoefficientSet coeffs(std::size_t n, const char* q, Rect r = unit)
{
    return make_coefficients(build_grid(n, n, r), Expression::parse("1"), Expression::parse(q));
}

SpaceTimeAtomicMeasure two_sources(double tstar, std::uint64_t seed, Vec2 a, Vec2 b)
{
    Rng rng(seed);
    return {{{a, sample_intensity(2, tstar, 0.6, rng)}, {b, sample_intensity(2, tstar, 0.4, rng)}}};
}

double trace_diff(const ParabolicSolution& fine, const ParabolicSolution& coarse)
{
    // max over coarse nodes past the startup of the boundary L2 difference
    double m = 0.0;
    const auto& b = fine.grid->boundary();
    for (std::size_t n = 0; n < coarse.time.t.size(); ++n) {
        const double t = coarse.time.t[n];
        if (t < 0.1) continue;
        const std::size_t nf = fine.time.index_of(t);
        double s = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double d = fine.sigma_trace[nf][k] - coarse.sigma_trace[n][k];
            s += b[k].weight * d * d;
        }
        m = std::max(m, std::sqrt(s));
    }
    return m;
}
}  // namespace

TEST_CASE("time grid with startup half steps")
{
    auto g = make_time_grid(1.0, 64, 2);
    CHECK(g.steps() == 66);
    CHECK(g.t.back() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.theta[0] == 1.0);
    CHECK(g.theta[3] == 1.0);
    CHECK(g.theta[4] == 0.5);
    CHECK(g.dt(0) == doctest::Approx(1.0 / 128));
    CHECK(g.index_of(0.5) == 34);
    CHECK_THROWS_AS(g.index_of(0.3), Error);
}

TEST_CASE("zero data stays zero")
{
    auto c = coeffs(17, "1");
    auto tg = make_time_grid(1.0, 64);
    ThetaStepper st(c, tg);
    std::vector<double> u(c.grid->size(), 0.0);
    for (std::size_t n = 0; n < tg.steps(); ++n) st.forward(n, u, {});
    for (double x : u) CHECK(x == 0.0);
}

TEST_CASE("mass identity with q = 0 at 128 cells, nt = 256")
{
    auto c = coeffs(129, "0");
    auto src = two_sources(0.5, 11, {0.3, 0.4}, {0.7, 0.65});
    auto sol = solve_forward_pt_sources(c, src, 1.0, 0.5, 256);
    CHECK(std::abs(sol.mass.back() - 1.0) <= 1e-3);
    CHECK(std::abs(sol.mass[sol.tstar_index] - 1.0) <= 1e-3);
    // nothing is injected after T*
    double drift = 0.0;
    for (std::size_t n = sol.tstar_index; n < sol.mass.size(); ++n)
        drift = std::max(drift, std::abs(sol.mass[n] - sol.mass.back()));
    CAPTURE(drift);
    CHECK(drift <= 1e-11);
    // comparison principle
    double umin = 0.0;
    for (std::size_t n = 0; n < c.grid->size(); ++n) umin = std::min(umin, sol.final_state[n].real());
    CHECK(umin >= -1e-8);
}

TEST_CASE("nonnegative sources keep u nonnegative")
{
    auto c = coeffs(65, "1 + x1");
    auto src = two_sources(0.5, 5, {0.25, 0.5}, {0.6, 0.7});
    ParabolicOptions opt;
    opt.keep_full = true;
    auto sol = solve_forward_pt_sources(c, src, 1.0, 0.5, 128, opt);
    double umin = 0.0;
    for (const auto& u : sol.full)
        for (double x : u) umin = std::min(umin, x);
    CHECK(umin >= -1e-8);
}

TEST_CASE("intensity period must equal T*")
{
    auto c = coeffs(33, "1");
    SpaceTimeAtomicMeasure src{{{{0.5, 0.5}, BandLimitedIntensity::constant(1.0 / 0.7, 0.7)}}};
    try {
        solve_forward_pt_sources(c, src, 1.0, 0.5, 64);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::admissibility);
    }
}

TEST_CASE("second order in time for the boundary trace")
{
    auto c = coeffs(33, "1");
    SpaceTimeAtomicMeasure src{{{{0.5, 0.5}, BandLimitedIntensity::constant(1.0 / 0.5, 0.5)}}};
    auto s64 = solve_forward_pt_sources(c, src, 1.0, 0.5, 64);
    auto s128 = solve_forward_pt_sources(c, src, 1.0, 0.5, 128);
    auto s256 = solve_forward_pt_sources(c, src, 1.0, 0.5, 256);
    const double e1 = trace_diff(s128, s64), e2 = trace_diff(s256, s128);
    CAPTURE(e1);
    CAPTURE(e2);
    CHECK(std::log2(e1 / e2) >= 1.9);
}

TEST_CASE("initial data: conservation, determinism and decay to the mean")
{
    auto c = coeffs(65, "0");
    AtomicMeasure mu{{{{0.48, 0.53}, 1.0}}};
    auto sol = solve_forward_initial_data(c, mu, 2.0, 256);
    for (double m : sol.mass) CHECK(std::abs(m - 1.0) <= 1e-3);
    double dev = 0.0;
    for (std::size_t n = 0; n < c.grid->size(); ++n) dev = std::max(dev, std::abs(sol.final_state[n].real() - 1.0));
    CHECK(dev <= 1e-2);
    auto again = solve_forward_initial_data(c, mu, 2.0, 256);
    CHECK(again.sigma_trace == sol.sigma_trace);
}

TEST_CASE("functional with v = 1 and q = 0 returns the injected mass")
{
    auto c = coeffs(65, "0");
    auto src = two_sources(0.5, 3, {0.3, 0.3}, {0.6, 0.55});
    auto sol = solve_forward_pt_sources(c, src, 1.0, 0.5, 128);
    TimeTestFunction v;
    v.K = 0;
    v.tstar = 0.5;
    v.grid = c.grid;
    v.modes = {ScalarField(c.grid, 1.0)};
    const auto R = functional_R_parabolic(sol, v);
    CHECK(std::abs(R.total() - 1.0) <= 1e-3);
    CHECK(std::abs(R.sigma_minus) <= 1e-12);
    // linearity in v
    v.modes[0] = ScalarField(c.grid, 2.5);
    CHECK(std::abs(functional_R_parabolic(sol, v).total() - 2.5 * R.total()) <= 1e-12);
}

TEST_CASE("duality with a CGO time test function")
{
    auto c = coeffs(129, "1 + 0.2*sin(2*x1)*x2", shifted);
    const double tstar = 0.5;
    Rng rng(17);
    SpaceTimeAtomicMeasure src{{{{0.55, 0.6}, sample_intensity(2, tstar, 1.0, rng)}}};
    std::vector<Vec2> pts{src.atoms[0].s};
    std::vector<BandLimitedIntensity> h{sample_intensity(2, tstar, 0.8, rng)};
    BasisOptions opt;
    opt.time_step = 1.0 / 256;
    auto v = build_time_test_function(pts, h, c, tstar, opt);
    auto sol = solve_forward_pt_sources(c, src, 1.0, tstar, 256);
    const Complex R = functional_R_parabolic(sol, v).total();
    const Complex exact = source_pairing(src, v);
    const Complex discrete = source_pairing_discrete(sol, src, v);
    CAPTURE(R);
    CAPTURE(exact);
    CAPTURE(discrete);
    CHECK(std::abs(R - exact) <= 0.05 * std::abs(exact));
    // exact up to the implicit Euler startup steps
    CHECK(std::abs(R - discrete) <= 1e-3 * std::abs(discrete));
    CHECK(std::abs(R.imag()) <= 1e-8 * std::abs(R));
}

TEST_CASE("sigma csv and norms")
{
    auto c = coeffs(9, "1");
    AtomicMeasure mu{{{{0.5, 0.5}, 1.0}}};
    auto sol = solve_forward_initial_data(c, mu, 1.0, 64);
    std::ostringstream os;
    write_sigma_csv(os, sol);
    const auto s = os.str();
    CHECK(s.rfind("time,arc,value\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) ==
          1 + sol.time.t.size() * c.grid->boundary().size());
    CHECK(sigma_l2(difference(sol, sol)) == 0.0);
    CHECK(sigma_l2(sol) > 0.0);
}
