#include "doctest.h"

#include <cmath>
#include <sstream>

#include "core/error.hpp"
#include "measures/measures.hpp"
#include "ot/ot.hpp"

using namespace otstab;

namespace {
std::vector<CostPoint> pts(std::initializer_list<Vec2> l)
{
    std::vector<CostPoint> v;
    for (auto p : l) v.push_back({p});
    return v;
}

struct Instance {
    std::vector<double> a, b;
    CostMatrix C;
};

Instance random_instance(Rng& rng, std::size_t m, std::size_t n, double cap)
{
    auto masses = [&](std::size_t k) {
        std::vector<double> w(k);
        double s = 0;
        for (auto& x : w) s += (x = rng.uniform(0.05, 1.0));
        for (auto& x : w) x /= s;
        return w;
    };
    std::vector<CostPoint> xs(m), ys(n);
    for (auto& p : xs) p.x = {rng.uniform(), rng.uniform()};
    for (auto& p : ys) p.x = {rng.uniform(), rng.uniform()};
    // share one location now and then so that zero-cost cells appear
    if (rng.uniform() < 0.5) ys[0].x = xs[0].x;
    CostSpec spec{CostKind::truncated_euclidean, cap};
    return {masses(m), masses(n), cost_matrix(spec, xs, ys)};
}
}  // namespace

TEST_CASE("eval_cost examples")
{
    CostSpec te{CostKind::truncated_euclidean, 2.0};
    CHECK(eval_cost(te, {{0.3, 0.3}}, {{0.3, 0.3}}) == 0.0);
    CostSpec capped{CostKind::truncated_euclidean, 0.5};
    CHECK(eval_cost(capped, {{0, 0}}, {{0.8, 0}}) == 0.5);
    CostSpec st{CostKind::spacetime, 10.0, 1.0, 1.0};
    CHECK(eval_cost(st, {{0.1, 0.1}, 0.0}, {{0.4, 0.5}, 0.3}) == doctest::Approx(std::sqrt(0.34)).epsilon(1e-15));
    CHECK_THROWS_AS(eval_cost(st, {{0.1, 0.1}}, {{0.4, 0.5}}), Error);
    CHECK_THROWS_AS(eval_cost(te, {{0.1, 0.1}, 0.0}, {{0.4, 0.5}, 1.0}), Error);
}

TEST_CASE("solve_ot small cases")
{
    CostSpec te{CostKind::truncated_euclidean, 2.0};
    std::vector<double> one{1.0};
    auto r = solve_ot(one, one, cost_matrix(te, pts({{0.1, 0.1}}), pts({{0.4, 0.1}})));
    CHECK(r.cost == doctest::Approx(0.3));
    CHECK(r.plan[0] == 1.0);
    CHECK(duality_gap(r) == 0.0);

    CostSpec eu{CostKind::truncated_euclidean, 100.0};
    std::vector<double> half{0.5, 0.5};
    auto r2 = solve_ot(half, half, cost_matrix(eu, pts({{0, 0}, {1, 0}}), pts({{0, 1}, {1, 1}})));
    CHECK(r2.cost == doctest::Approx(1.0).epsilon(1e-14));

    auto same = pts({{0.2, 0.3}, {0.7, 0.1}, {0.5, 0.9}});
    std::vector<double> w{0.2, 0.5, 0.3};
    auto r3 = solve_ot(w, w, cost_matrix(te, same, same));
    CHECK(r3.cost == 0.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r3.at(i, i) == doctest::Approx(w[i]));

    std::vector<double> bad{0.5, 0.6};
    CHECK_THROWS_AS(solve_ot(bad, half, cost_matrix(eu, pts({{0, 0}, {1, 0}}), pts({{0, 1}, {1, 1}}))), Error);
}

TEST_CASE("brute_force_ot")
{
    CostSpec te{CostKind::truncated_euclidean, 2.0};
    std::vector<double> one{1.0}, b{0.2, 0.3, 0.5};
    auto ys = pts({{0.1, 0.2}, {0.5, 0.5}, {0.9, 0.1}});
    auto C = cost_matrix(te, pts({{0.3, 0.3}}), ys);
    CHECK(brute_force_ot(one, b, C) == doctest::Approx(0.2 * C(0, 0) + 0.3 * C(0, 1) + 0.5 * C(0, 2)));
    auto same = pts({{0.2, 0.3}, {0.7, 0.1}});
    std::vector<double> w{0.4, 0.6};
    CHECK(brute_force_ot(w, w, cost_matrix(te, same, same)) == 0.0);
    std::vector<double> five(5, 0.2);
    CostMatrix big{5, 5, std::vector<double>(25, 1.0)};
    CHECK_THROWS_AS(brute_force_ot(five, five, big), Error);
}

TEST_CASE("solve_ot matches the oracle and satisfies its invariants")
{
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 1 + rng.next() % 4, n = 1 + rng.next() % 4;
        auto inst = random_instance(rng, m, n, rng.uniform(0.3, 1.5));
        auto r = solve_ot(inst.a, inst.b, inst.C);
        CHECK(std::abs(r.cost - brute_force_ot(inst.a, inst.b, inst.C)) <= 1e-9 * (1 + r.cost));
        CHECK(std::abs(duality_gap(r)) <= 1e-9);
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) {
                s += r.at(i, j);
                CHECK(r.at(i, j) >= 0.0);
                CHECK(r.phi[i] + r.psi[j] <= inst.C(i, j) + 1e-10);
            }
            CHECK(std::abs(s - inst.a[i]) <= 1e-10);
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < m; ++i) s += r.at(i, j);
            CHECK(std::abs(s - inst.b[j]) <= 1e-10);
        }
    }
}

TEST_CASE("larger instances stay optimal")
{
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = random_instance(rng, 30, 25, 0.8);
        auto r = solve_ot(inst.a, inst.b, inst.C);
        CHECK(std::abs(duality_gap(r)) <= 1e-9);
        for (std::size_t i = 0; i < 30; ++i)
            for (std::size_t j = 0; j < 25; ++j) CHECK(r.phi[i] + r.psi[j] <= inst.C(i, j) + 1e-10);
    }
}

TEST_CASE("enlarging the cap never lowers the optimal cost")
{
    Rng rng(3);
    std::vector<CostPoint> xs(4), ys(3);
    for (auto& p : xs) p.x = {rng.uniform(), rng.uniform()};
    for (auto& p : ys) p.x = {rng.uniform(), rng.uniform()};
    std::vector<double> a{0.1, 0.2, 0.3, 0.4}, b{0.3, 0.3, 0.4};
    double prev = 0;
    for (double D : {0.1, 0.2, 0.4, 0.8, 1.6}) {
        auto r = solve_ot(a, b, cost_matrix(CostSpec{CostKind::truncated_euclidean, D}, xs, ys));
        CHECK(r.cost >= prev - 1e-15);
        prev = r.cost;
    }
}

TEST_CASE("normalize_potentials")
{
    CostMatrix C11{1, 1, {0.7}};
    auto n1 = normalize_potentials(DualPair{{0.7 - 3.0}, {3.0}}, C11, 1.0);
    CHECK(n1.phi[0] == doctest::Approx(0.7));
    CHECK(n1.psi[0] == 0.0);

    CostSpec te{CostKind::truncated_euclidean, 2.0};
    auto same = pts({{0.2, 0.3}, {0.7, 0.1}, {0.4, 0.8}});
    std::vector<double> w{0.3, 0.3, 0.4};
    auto C = cost_matrix(te, same, same);
    auto zero = normalize_potentials(DualPair{{0, 0, 0}, {0, 0, 0}}, C, 2.0);
    for (double p : zero.phi) CHECK(p == 0.0);
    for (double p : zero.psi) CHECK(p == 0.0);
    // the LP may return any optimal pair phi = -psi; normalization keeps J = 0 and the box
    auto r = solve_ot(w, w, C);
    auto nz = normalize_potentials(DualPair{r.phi, r.psi}, C, 2.0);
    CHECK(std::abs(dual_value(nz, w, w)) < 1e-15);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(nz.phi[i] >= 0.0);
        CHECK(nz.psi[i] <= 0.0);
        CHECK(std::abs(nz.phi[i] + nz.psi[i]) < 1e-15);
    }

    CHECK_THROWS_AS(normalize_potentials(DualPair{{1.0}, {1.0}}, C11, 1.0), Error);

    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = random_instance(rng, 1 + rng.next() % 4, 1 + rng.next() % 4, 0.9);
        auto res = solve_ot(inst.a, inst.b, inst.C);
        const double bound = 0.9;
        auto nd = normalize_potentials(DualPair{res.phi, res.psi}, inst.C, bound);
        CHECK(std::abs(dual_value(nd, inst.a, inst.b) - dual_value(DualPair{res.phi, res.psi}, inst.a, inst.b)) <= 1e-10);
        for (std::size_t i = 0; i < inst.C.m; ++i) {
            CHECK(nd.phi[i] >= 0.0);
            CHECK(nd.phi[i] <= bound);
            for (std::size_t j = 0; j < inst.C.n; ++j) CHECK(nd.phi[i] + nd.psi[j] <= inst.C(i, j) + 1e-10);
        }
        for (double p : nd.psi) {
            CHECK(p <= 0.0);
            CHECK(p >= -bound);
        }
    }
}

TEST_CASE("duality gap detects a suboptimal recirculation")
{
    CostSpec te{CostKind::truncated_euclidean, 2.0};
    auto xs = pts({{0.1, 0.1}, {0.9, 0.9}});
    std::vector<double> half{0.5, 0.5};
    auto r = solve_ot(half, half, cost_matrix(te, xs, xs));
    // move 0.1 around the 2x2 cycle; marginals stay intact
    r.plan[0] -= 0.1;
    r.plan[3] -= 0.1;
    r.plan[1] += 0.1;
    r.plan[2] += 0.1;
    CHECK(duality_gap(r) > 0.0);
}

TEST_CASE("plan csv")
{
    std::vector<double> one{1.0};
    auto r = solve_ot(one, one, CostMatrix{1, 1, {0.25}});
    std::ostringstream os;
    write_plan_csv(os, r);
    CHECK(os.str() == "row,col,mass,cost\n0,0,1,0.25\n");
}
