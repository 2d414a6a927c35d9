#include "ot/ot.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <queue>

#include "core/error.hpp"

namespace otstab {

double CostSpec::sup_norm(double diameter, double time_span) const
{
    switch (kind) {
    case CostKind::truncated_euclidean: return std::min(cap, diameter);
    case CostKind::scaled_squared: return scale * diameter * diameter;
    case CostKind::spacetime: return std::min(cap, std::hypot(diameter, lambda_t * time_span));
    }
    return 0.0;
}

double eval_cost(const CostSpec& c, const CostPoint& x, const CostPoint& y)
{
    const bool timed = !std::isnan(x.t) && !std::isnan(y.t);
    const bool untimed = std::isnan(x.t) && std::isnan(y.t);
    const double d = norm(x.x - y.x);
    switch (c.kind) {
    case CostKind::truncated_euclidean:
        require(untimed, ErrorCode::shape_mismatch, "spatial cost applied to space-time points");
        return std::min(c.cap, d);
    case CostKind::scaled_squared:
        require(untimed, ErrorCode::shape_mismatch, "spatial cost applied to space-time points");
        return c.scale * d * d;
    case CostKind::spacetime:
        require(timed, ErrorCode::shape_mismatch, "space-time cost needs time stamps on both points");
        return std::min(c.cap, std::sqrt(d * d + c.lambda_t * c.lambda_t * (x.t - y.t) * (x.t - y.t)));
    }
    return 0.0;
}

double CostMatrix::max() const { return c.empty() ? 0.0 : *std::max_element(c.begin(), c.end()); }

CostMatrix cost_matrix(const CostSpec& spec, std::span<const CostPoint> xs, std::span<const CostPoint> ys)
{
    CostMatrix C{xs.size(), ys.size(), std::vector<double>(xs.size() * ys.size())};
    for (std::size_t i = 0; i < xs.size(); ++i)
        for (std::size_t j = 0; j < ys.size(); ++j) C.c[i * C.n + j] = eval_cost(spec, xs[i], ys[j]);
    return C;
}

namespace {

void check_masses(std::span<const double> a, std::span<const double> b, const CostMatrix& C)
{
    require(!a.empty() && !b.empty(), ErrorCode::invalid_argument, "empty support");
    require(C.m == a.size() && C.n == b.size(), ErrorCode::shape_mismatch, "cost matrix does not match the supports");
    for (double x : a) require(x >= 0.0, ErrorCode::invalid_argument, "negative mass");
    for (double x : b) require(x >= 0.0, ErrorCode::invalid_argument, "negative mass");
    const double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
    require(std::abs(sa - sb) <= 1e-10, ErrorCode::imbalance, "masses do not balance");
}

// Basis tree over m row nodes and n column nodes (column node = m + j).
struct Basis {
    std::size_t m, n;
    std::vector<std::vector<std::size_t>> cells_of;  // node -> basic cell ids
    std::vector<bool> basic;

    Basis(std::size_t m_, std::size_t n_) : m(m_), n(n_), cells_of(m_ + n_), basic(m_ * n_, false) {}

    void add(std::size_t cell)
    {
        basic[cell] = true;
        cells_of[cell / n].push_back(cell);
        cells_of[m + cell % n].push_back(cell);
    }
    void remove(std::size_t cell)
    {
        basic[cell] = false;
        for (std::size_t node : {cell / n, m + cell % n}) {
            auto& v = cells_of[node];
            v.erase(std::find(v.begin(), v.end(), cell));
        }
    }
    std::size_t other(std::size_t cell, std::size_t node) const { return node < m ? m + cell % n : cell / n; }

    // Tree path of cells from node `from` to node `to` (BFS parent pointers).
    std::vector<std::size_t> path(std::size_t from, std::size_t to) const
    {
        const std::size_t N = m + n, none = static_cast<std::size_t>(-1);
        std::vector<std::size_t> via(N, none), prev(N, none);
        std::vector<bool> seen(N, false);
        std::queue<std::size_t> q;
        q.push(from);
        seen[from] = true;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            if (u == to) break;
            for (std::size_t cell : cells_of[u]) {
                const std::size_t w = other(cell, u);
                if (!seen[w]) {
                    seen[w] = true;
                    via[w] = cell;
                    prev[w] = u;
                    q.push(w);
                }
            }
        }
        require(seen[to], ErrorCode::internal, "basis is not a spanning tree");
        std::vector<std::size_t> cells;
        for (std::size_t u = to; u != from; u = prev[u]) cells.push_back(via[u]);
        std::reverse(cells.begin(), cells.end());
        return cells;
    }
};

void tree_duals(const Basis& B, const CostMatrix& C, std::vector<double>& u, std::vector<double>& v)
{
    const std::size_t m = B.m, n = B.n;
    std::vector<double> pot(m + n, 0.0);
    std::vector<bool> seen(m + n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const std::size_t x = stack.back();
        stack.pop_back();
        for (std::size_t cell : B.cells_of[x]) {
            const std::size_t y = B.other(cell, x);
            if (seen[y]) continue;
            seen[y] = true;
            pot[y] = C.c[cell] - pot[x];
            stack.push_back(y);
        }
    }
    u.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(m));
    v.assign(pot.begin() + static_cast<std::ptrdiff_t>(m), pot.end());
}

}  // namespace

TransportResult solve_ot(std::span<const double> a, std::span<const double> b, const CostMatrix& C)
{
    check_masses(a, b, C);
    const std::size_t m = a.size(), n = b.size();
    TransportResult r;
    r.a.assign(a.begin(), a.end());
    r.b.assign(b.begin(), b.end());
    r.C = C;
    r.plan.assign(m * n, 0.0);
    auto& x = r.plan;

    // Northwest corner: exactly m + n - 1 basic cells, degenerate zeros included.
    Basis B(m, n);
    {
        std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
        std::size_t i = 0, j = 0;
        while (true) {
            const double t = std::min(sa[i], sb[j]);
            x[i * n + j] = t;
            B.add(i * n + j);
            sa[i] -= t;
            sb[j] -= t;
            if (i + 1 == m && j + 1 == n) break;
            if (j + 1 == n || (i + 1 < m && sa[i] <= sb[j])) ++i;
            else ++j;
        }
    }

    const double tol = 1e-13 * (1.0 + C.max());
    const std::size_t cap = 50 * (m + n) * (m + n) + 1000;
    std::vector<double> u, v;
    for (;;) {
        tree_duals(B, C, u, v);
        // Bland: lowest-index improving cell enters
        std::size_t enter = m * n;
        for (std::size_t cell = 0; cell < m * n && enter == m * n; ++cell)
            if (!B.basic[cell] && C.c[cell] - u[cell / n] - v[cell % n] < -tol) enter = cell;
        if (enter == m * n) break;
        require(++r.pivots <= cap, ErrorCode::internal, "transportation simplex exceeded its pivot budget");

        // cycle: enter (+), then alternating along the tree path column -> row
        const auto path = B.path(m + enter % n, enter / n);
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = m * n;
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const std::size_t cell = path[k];
            if (x[cell] < theta || (x[cell] == theta && cell < leave)) {
                theta = x[cell];
                leave = cell;
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            double& val = x[path[k]];
            val = (k % 2 == 0) ? std::max(0.0, val - theta) : val + theta;
        }
        x[enter] = theta;
        x[leave] = 0.0;
        B.add(enter);
        B.remove(leave);
    }
    r.phi = u;
    r.psi = v;
    r.cost = primal_value(x, C);
    return r;
}

double brute_force_ot(std::span<const double> a, std::span<const double> b, const CostMatrix& C)
{
    check_masses(a, b, C);
    const std::size_t m = a.size(), n = b.size();
    require(m <= 4 && n <= 4, ErrorCode::oracle_size, "brute-force oracle supports at most 4 atoms per side");
    const std::size_t E = m * n, k = m + n - 1;
    double best = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    for (;;) {
        // spanning-tree test via union-find
        std::vector<std::size_t> parent(m + n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](std::size_t z) {
            while (parent[z] != z) z = parent[z] = parent[parent[z]];
            return z;
        };
        bool tree = true;
        for (std::size_t e : pick) {
            const std::size_t r1 = find(e / n), r2 = find(m + e % n);
            if (r1 == r2) {
                tree = false;
                break;
            }
            parent[r1] = r2;
        }
        if (tree) {
            // unique flow by peeling leaves
            std::vector<double> rest(m + n);
            for (std::size_t i = 0; i < m; ++i) rest[i] = a[i];
            for (std::size_t j = 0; j < n; ++j) rest[m + j] = b[j];
            std::vector<bool> used(k, false);
            std::vector<double> flow(k, 0.0);
            for (std::size_t step = 0; step < k; ++step) {
                std::vector<std::size_t> deg(m + n, 0), last(m + n, 0);
                for (std::size_t t = 0; t < k; ++t)
                    if (!used[t])
                        for (std::size_t node : {pick[t] / n, m + pick[t] % n}) {
                            ++deg[node];
                            last[node] = t;
                        }
                std::size_t leaf = m + n;
                for (std::size_t node = 0; node < m + n && leaf == m + n; ++node)
                    if (deg[node] == 1) leaf = node;
                const std::size_t t = last[leaf];
                const std::size_t far = leaf < m ? m + pick[t] % n : pick[t] / n;
                flow[t] = rest[leaf];
                rest[far] -= rest[leaf];
                rest[leaf] = 0.0;
                used[t] = true;
            }
            bool feasible = true;
            double cost = 0.0;
            for (std::size_t t = 0; t < k; ++t) {
                if (flow[t] < -1e-12) feasible = false;
                cost += flow[t] * C.c[pick[t]];
            }
            if (feasible) best = std::min(best, cost);
        }
        // next combination
        std::size_t i = k;
        while (i > 0 && pick[i - 1] == E - k + (i - 1)) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

DualPair normalize_potentials(const DualPair& d, const CostMatrix& C, double sup_norm)
{
    const std::size_t m = C.m, n = C.n;
    require(d.phi.size() == m && d.psi.size() == n, ErrorCode::shape_mismatch, "duals do not match the cost matrix");
    require(C.max() <= sup_norm, ErrorCode::invalid_argument, "sup_norm is smaller than a cost entry");
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            require(d.phi[i] + d.psi[j] <= C(i, j) + 1e-10, ErrorCode::infeasible_duals,
                    "input potentials violate phi + psi <= c");

    std::vector<double> psi(n, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) psi[j] = std::min(psi[j], C(i, j) - d.phi[i]);
    const double lambda = *std::max_element(psi.begin(), psi.end());
    for (auto& p : psi) p = std::clamp(p - lambda, -sup_norm, 0.0);

    DualPair out{std::vector<double>(m, std::numeric_limits<double>::infinity()), psi};
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.phi[i] = std::min(out.phi[i], C(i, j) - psi[j]);
    return out;
}

double dual_value(const DualPair& d, std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * d.phi[i];
    for (std::size_t j = 0; j < b.size(); ++j) s += b[j] * d.psi[j];
    return s;
}

double primal_value(std::span<const double> plan, const CostMatrix& C)
{
    double s = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k) s += plan[k] * C.c[k];
    return s;
}

double duality_gap(const TransportResult& r)
{
    return primal_value(r.plan, r.C) - dual_value(DualPair{r.phi, r.psi}, r.a, r.b);
}

void write_plan_csv(std::ostream& os, const TransportResult& r)
{
    os << "row,col,mass,cost\n";
    char buf[128];
    for (std::size_t i = 0; i < r.C.m; ++i)
        for (std::size_t j = 0; j < r.C.n; ++j) {
            if (r.at(i, j) == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%.17g\n", i, j, r.at(i, j), r.C(i, j));
            os << buf;
        }
}

}  // namespace otstab
