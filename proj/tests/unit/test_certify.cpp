#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "certify/certify.hpp"
#include "core/error.hpp"

using namespace otstab;

namespace {
const Rect shifted{{0.1, 0.1}, {1.1, 1.1}};
constexpr double inf = std::numeric_limits<double>::infinity();

CoefficientSet coeffs(std::size_t n, const char* kappa = "1", const char* q = "1 + 0.3*x1*x2")
{
    return make_coefficients(build_grid(n, n, shifted), Expression::parse(kappa), Expression::parse(q));
}

DualPair normalized(const TransportResult& tr, double sup)
{
    return normalize_potentials({tr.phi, tr.psi}, tr.C, sup);
}

TransportResult spatial_ot(const AtomicMeasure& mu, const AtomicMeasure& nu, const CostSpec& cs)
{
    std::vector<CostPoint> xs, ys;
    for (const auto& a : mu.atoms) xs.push_back({a.s});
    for (const auto& a : nu.atoms) ys.push_back({a.s});
    return solve_ot(mu.amplitudes(), nu.amplitudes(), cost_matrix(cs, xs, ys));
}
}  // namespace

TEST_CASE("elliptic certificate closed form")
{
    EllipticCertificateParams p;
    p.M = 1;
    p.eta1 = inf;
    p.eta2 = 0.8;
    p.R0 = 0.8;
    const auto c = certificate_elliptic(p);
    CHECK(c.r == doctest::Approx(2.0 * std::numbers::sqrt2 / 0.8).epsilon(1e-14));
    CHECK(c.value == doctest::Approx(2.0 * std::numbers::sqrt2 / 0.8).epsilon(1e-14));
    CHECK(c.log10_value == doctest::Approx(std::log10(2.0 * std::numbers::sqrt2 / 0.8)).epsilon(1e-14));
    CHECK_FALSE(c.note.empty());

    auto p2 = p;
    p2.cost_sup = 2.0;
    CHECK(certificate_elliptic(p2).value == doctest::Approx(2.0 * c.value).epsilon(1e-14));

    EllipticCertificateParams q{3, 0.5, 0.3, 1.5, 1.2, 1.4, 0.7, 1.0, 1.0};
    const double base = certificate_elliptic(q).log10_value;
    q.eta1 = 0.4;
    CHECK(certificate_elliptic(q).log10_value > base);
    q.eta1 = 0.2;
    CHECK(certificate_elliptic(q).log10_value > 300.0);
    CHECK(std::isinf(certificate_elliptic(q).value));  // far beyond double range

    q.eta2 = 0.0;
    CHECK_THROWS_AS(certificate_elliptic(q), Error);
    q.eta2 = 0.3;
    q.C3 = -1.0;
    CHECK_THROWS_AS(certificate_elliptic(q), Error);
}

TEST_CASE("parabolic certificate")
{
    ParabolicCertificateParams p{2, 1, 0.5, 0.5, 1.0, 2.0, 0.0, 1.0, 1.0};
    const auto c = certificate_parabolic(p);
    CHECK(c.r_K == doctest::Approx(4.0 * (8.0 + (1.0 + 2.0 * std::numbers::pi) / (std::numbers::sqrt2 * 0.5))));
    CHECK(c.r_K == doctest::Approx(73.2).epsilon(1e-4));
    CHECK(c.structural == doctest::Approx(std::sqrt(4.0 * 3.0)));
    CHECK(c.note.find("C5") != std::string::npos);

    // K = 0 reduces to the elliptic rtilde with M = n/2
    ParabolicCertificateParams k0{4, 0, 0.3, 0.4, 0.5, 1.0, 0.7, 1.0, 1.3};
    EllipticCertificateParams e{2, 0.3, 0.4, 1.0, 1.0, 1.0, 0.7, 1.3, 1.0};
    CHECK(certificate_parabolic(k0).r_K == doctest::Approx(certificate_elliptic(e).r).epsilon(1e-14));

    double prev = 0.0;
    for (int K = 0; K <= 4; ++K) {
        k0.K = K;
        const double r = certificate_parabolic(k0).r_K;
        CHECK(r > prev);
        prev = r;
    }
    k0.T = 0.4;  // T <= T*
    CHECK_THROWS_AS(certificate_parabolic(k0), Error);
}

TEST_CASE("combine_elliptic: identical and disjoint single atoms")
{
    const auto c = coeffs(33);
    const CostSpec cs;
    const double sup = cs.sup_norm(norm(c.grid->extent()));
    BasisOptions opt;

    AtomicMeasure mu{{{{0.4, 0.5}, 0.6}, {{0.8, 0.7}, 0.4}}};
    auto tr = spatial_ot(mu, mu, cs);
    CHECK(tr.cost == 0.0);
    auto d = normalized(tr, sup);
    const auto part = partition_supports(mu, mu);
    CHECK(part.S4.size() == 2);
    auto comb = combine_elliptic(d, part, mu, mu, c, opt);
    CHECK(comb.atom_level == 0.0);
    CHECK(dual_value(d, mu.amplitudes(), mu.amplitudes()) <= 1e-15);

    AtomicMeasure x{{{{0.4, 0.5}, 1.0}}}, y{{{{0.8, 0.7}, 1.0}}};
    tr = spatial_ot(x, y, cs);
    d = normalized(tr, sup);
    const double cxy = std::hypot(0.4, 0.2);
    CHECK(d.phi[0] + d.psi[0] == doctest::Approx(cxy).epsilon(1e-14));
    comb = combine_elliptic(d, partition_supports(x, y), x, y, c, opt);
    REQUIRE(comb.points.size() == 2);
    CHECK(comb.targets[0] - comb.targets[1] == doctest::Approx(cxy).epsilon(1e-14));
    CHECK(comb.atom_level == doctest::Approx(cxy).epsilon(1e-14));
    CHECK(comb.atom_level == doctest::Approx(tr.cost).epsilon(1e-14));
    // the grid field interpolates the prescribed values
    CHECK(std::abs(comb.v.at({0.4, 0.5}).real() - comb.targets[0]) <= 1e-6);
}

TEST_CASE("combine_elliptic: atom-level identity over seeded pairs")
{
    const auto c = coeffs(33);
    const CostSpec cs;
    const double sup = cs.sup_norm(norm(c.grid->extent()));
    MeasureSpec spec;
    spec.M = 3;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto [mu, nu] = sample_measure_pair(spec, shifted, seed);
        const auto tr = spatial_ot(mu, nu, cs);
        const auto d = normalized(tr, sup);
        const double J = dual_value(d, mu.amplitudes(), nu.amplitudes());
        // the dual value at the optimum is the transport cost
        CHECK(std::abs(J - tr.cost) <= 1e-9);
        const auto part = partition_supports(mu, nu);
        const auto comb = combine_elliptic(d, part, mu, nu, c, BasisOptions{});
        CHECK(std::abs(comb.atom_level - comb.identity_rhs) <= 1e-14 * (1.0 + std::abs(comb.atom_level)));
        CHECK(comb.atom_level >= J - 1e-12);
    }
}

TEST_CASE("combine_parabolic: identical measures and crossing intensities")
{
    const auto c = coeffs(33, "1", "1");
    const double tstar = 0.5;
    const int K = 2;
    CostSpec cs;
    cs.kind = CostKind::spacetime;
    const double sup = cs.sup_norm(norm(c.grid->extent()), tstar);
    auto run = [&](const SpaceTimeAtomicMeasure& mu, const SpaceTimeAtomicMeasure& nu) {
        const auto em = discretize_in_time(mu, 32), en = discretize_in_time(nu, 32);
        std::vector<CostPoint> xs, ys;
        std::vector<double> a, b;
        for (const auto& e : em) {
            xs.push_back({e.s, e.t});
            a.push_back(e.mass);
        }
        for (const auto& e : en) {
            ys.push_back({e.s, e.t});
            b.push_back(e.mass);
        }
        const auto tr = solve_ot(a, b, cost_matrix(cs, xs, ys));
        const auto d = normalize_potentials({tr.phi, tr.psi}, tr.C, sup);
        BasisOptions opt;
        auto comb = combine_parabolic(d, partition_supports(mu, nu), mu, nu, em, en, 32, c, tstar, opt);
        return std::tuple{tr.cost, dual_value(d, a, b), comb};
    };

    // crossing: a(t) = 2 + cos, b(t) = 2 - cos on the same location, plus one extra atom each
    const std::vector<Complex> up{{0, 0}, {0.5, 0}, {2, 0}, {0.5, 0}, {0, 0}};
    const std::vector<Complex> down{{0, 0}, {-0.5, 0}, {2, 0}, {-0.5, 0}, {0, 0}};
    auto scale = [](std::vector<Complex> v, double s) {
        for (auto& x : v) x *= s;
        return v;
    };
    SpaceTimeAtomicMeasure mu{{{{0.5, 0.5}, BandLimitedIntensity(K, tstar, scale(up, 0.5))},
                               {{0.9, 0.4}, BandLimitedIntensity(K, tstar, scale(up, 0.5))}}};
    SpaceTimeAtomicMeasure nu{{{{0.5, 0.5}, BandLimitedIntensity(K, tstar, scale(down, 0.5))},
                               {{0.3, 0.8}, BandLimitedIntensity(K, tstar, scale(down, 0.5))}}};
    CHECK(mu.total_mass() == doctest::Approx(1.0));

    auto [Tc, J, comb] = run(mu, nu);
    CHECK(std::abs(J - Tc) <= 1e-9);
    CHECK(comb.atom_level >= J - 1e-12);
    // projection orthogonality: the closed-form pairing with v equals the event sum
    CHECK(comb.projected == doctest::Approx(comb.atom_level).epsilon(1e-6));
    // the selector switches inside the common location
    const auto& s3 = comb.selected.back();
    bool switched = false;
    for (std::size_t m = 1; m < s3.size(); ++m) switched |= (s3[m] != s3[m - 1]);
    CHECK(switched);

    auto [Tc0, J0, same] = run(mu, mu);
    CHECK(Tc0 == 0.0);
    CHECK(same.atom_level == 0.0);
    CHECK(J0 <= 1e-15);
}

TEST_CASE("stability_experiment: identical measures give zeros")
{
    ExperimentConfig cfg;
    cfg.nx = cfg.ny = 33;
    cfg.trials = 3;
    cfg.identical = true;
    cfg.kappa = "1 + 0.1*x1";
    const auto rep = stability_experiment(cfg);
    REQUIRE(rep.rows.size() == 3);
    for (const auto& r : rep.rows) {
        CHECK(r.ok);
        CHECK(r.T_c == 0.0);
        CHECK(r.boundary_misfit == 0.0);
        CHECK(r.R1_minus_R2 == 0.0);
        CHECK(r.chain_ok);
    }
    CHECK(rep.all_ok());
    CHECK(rep.max_ratio == 0.0);
}

TEST_CASE("stability_experiment: elliptic chain, determinism and threads")
{
    ExperimentConfig cfg;
    cfg.nx = cfg.ny = 49;
    cfg.trials = 3;
    cfg.kappa = "1 + 0.2*sin(pi*x1)*sin(pi*x2)";
    cfg.q = "1 + 0.5*x1*x2";
    const auto a = stability_experiment(cfg);
    for (const auto& r : a.rows) {
        REQUIRE(r.ok);
        CHECK(r.chain_ok);
        CHECK(r.below_certificate);
        CHECK(r.combine_gap <= 1e-14);
        CHECK(r.T_c <= r.R1_minus_R2 * 1.1);
        CHECK(r.identity_residual < 1e-3);
    }
    CHECK(a.calibrated);

    cfg.threads = 3;
    const auto b = stability_experiment(cfg);
    std::ostringstream ca, cb, ja, jb;
    write_report_csv(ca, a);
    write_report_csv(cb, b);
    write_report_json(ja, a);
    write_report_json(jb, b);
    CHECK(ca.str() == cb.str());
    CHECK(ja.str() == jb.str());
    const std::string csv = ca.str();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

    std::ostringstream svg, sj;
    write_scatter_svg(svg, a);
    CHECK(svg.str().find("<svg") == 0);
    CHECK(svg.str().find("<circle") != std::string::npos);
    write_summary_json(sj, a);
    for (const char* key : {"\"max_ratio\"", "\"min_margin\"", "\"failures\"", "\"runtime_s\""})
        CHECK(sj.str().find(key) != std::string::npos);
}

TEST_CASE("stage errors are recorded per trial")
{
    ExperimentConfig cfg;
    cfg.nx = cfg.ny = 33;
    cfg.trials = 2;
    // an atom one cell from the boundary violates the forward margin
    cfg.mu = AtomicMeasure{{{{0.11, 0.5}, 1.0}}};
    cfg.nu = AtomicMeasure{{{{0.6, 0.6}, 1.0}}};
    const auto rep = stability_experiment(cfg);
    CHECK(rep.failures == 2);
    for (const auto& r : rep.rows) {
        CHECK_FALSE(r.ok);
        CHECK(r.error.find("margin") != std::string::npos);
    }
    std::ostringstream csv;
    write_report_csv(csv, rep);
    CHECK(csv.str().find("failed") != std::string::npos);
}

TEST_CASE("parabolic and initial-data chains on a small grid")
{
    ExperimentConfig cfg;
    cfg.mode = ExperimentMode::parabolic;
    cfg.cost.kind = CostKind::spacetime;
    cfg.nx = cfg.ny = 33;
    cfg.nt = 128;
    cfg.sampling.M = 2;
    cfg.trials = 1;
    cfg.control.stop_terminal = 1e-4;
    auto rep = stability_experiment(cfg);
    REQUIRE(rep.rows[0].ok);
    CHECK(rep.rows[0].chain_ok);
    CHECK(rep.rows[0].transfer_residual <= 0.05);
    CHECK(std::isfinite(rep.max_ratio));

    cfg.mode = ExperimentMode::initial_data;
    cfg.cost.kind = CostKind::truncated_euclidean;
    cfg.control.epsilon = 1e-8;
    cfg.control.stop_terminal = 1e-5;
    rep = stability_experiment(cfg);
    REQUIRE(rep.rows[0].ok);
    CHECK(rep.rows[0].identity_residual <= 0.1);
    CHECK(rep.rows[0].chain_ok);
}
