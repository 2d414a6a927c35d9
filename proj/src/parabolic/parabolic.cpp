#include "parabolic/parabolic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>

#include "core/error.hpp"
#include "elliptic/elliptic.hpp"

namespace otstab {

std::size_t TimeGrid::index_of(double time) const
{
    const double tol = 1e-9 * std::max(1.0, std::abs(t.back()));
    for (std::size_t n = 0; n < t.size(); ++n)
        if (std::abs(t[n] - time) <= tol) return n;
    fail(ErrorCode::invalid_argument, "time " + std::to_string(time) + " is not a node of the time grid");
}

TimeGrid make_time_grid(double T, std::size_t nt, std::size_t rannacher)
{
    require(T > 0 && nt >= 1, ErrorCode::invalid_argument, "time grid needs T > 0 and nt >= 1");
    require(rannacher <= nt, ErrorCode::invalid_argument, "more startup steps than steps");
    const double dt = T / static_cast<double>(nt);
    TimeGrid g;
    g.t.push_back(0.0);
    for (std::size_t n = 0; n < nt; ++n) {
        if (n < rannacher) {
            g.t.push_back((static_cast<double>(n) + 0.5) * dt);
            g.theta.push_back(1.0);
            g.theta.push_back(1.0);
        } else {
            g.theta.push_back(0.5);
        }
        g.t.push_back(static_cast<double>(n + 1) * dt);
    }
    return g;
}

ThetaStepper::ThetaStepper(const CoefficientSet& c, const TimeGrid& time) : op_(c), time_(time)
{
    const auto& g = op_.grid();
    work_.resize(g.size());
    for (std::size_t n = 0; n < time_.steps(); ++n) {
        const double dt = time_.dt(n), th = time_.theta[n];
        require(dt > 0, ErrorCode::invalid_argument, "time nodes must increase");
        const std::pair<double, double> key{std::round(dt * 1e12), th};
        auto it = factors_.find(key);
        if (it == factors_.end()) {
            auto f = std::make_shared<BandedLdlt<double>>(g.size(), g.nx(), [&](std::size_t i, std::size_t j) {
                if (i == j) return op_.mass(i) + th * dt * op_.diagonal(i);
                return th * dt * op_.stiffness(i, j);
            });
            it = factors_.emplace(key, std::move(f)).first;
        }
        step_factor_.push_back(it->second.get());
    }
}

const BandedLdlt<double>& ThetaStepper::factor(std::size_t n) const { return *step_factor_.at(n); }

void ThetaStepper::explicit_part(std::size_t n, std::span<const double> x, std::vector<double>& rhs) const
{
    const double c = (1.0 - time_.theta[n]) * time_.dt(n);
    rhs.resize(x.size());
    if (c != 0.0) op_.apply(x, work_);
    for (std::size_t i = 0; i < x.size(); ++i) rhs[i] = op_.mass(i) * x[i] - (c != 0.0 ? c * work_[i] : 0.0);
}

void ThetaStepper::forward(std::size_t n, std::vector<double>& u, std::span<const double> load) const
{
    std::vector<double> rhs;
    explicit_part(n, u, rhs);
    const double dt = time_.dt(n);
    if (!load.empty())
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * load[i];
    factor(n).solve_in_place(std::span<double>(rhs));
    u.swap(rhs);
}

void ThetaStepper::adjoint(std::size_t n, std::vector<double>& psi, std::span<const double> flux) const
{
    std::vector<double> rhs;
    explicit_part(n, psi, rhs);
    const double dt = time_.dt(n);
    const auto& b = op_.grid().boundary();
    if (!flux.empty())
        for (std::size_t k = 0; k < b.size(); ++k) rhs[b[k].node] += dt * b[k].weight * flux[k];
    factor(n).solve_in_place(std::span<double>(rhs));
    psi.swap(rhs);
}

double ParabolicSolution::trace_theta(std::size_t n, std::size_t k) const
{
    const double th = time.theta[n];
    return th * sigma_trace[n + 1][k] + (1.0 - th) * sigma_trace[n][k];
}

namespace {

void require_unit_kappa(const CoefficientSet& c)
{
    for (std::size_t n = 0; n < c.kappa.size(); ++n)
        require(std::abs(c.kappa[n] - Complex(1.0)) <= 1e-14, ErrorCode::invalid_argument,
                "the parabolic model requires kappa = 1");
}

ScalarField to_field(const GridPtr& g, const std::vector<double>& u)
{
    ScalarField f(g);
    for (std::size_t n = 0; n < u.size(); ++n) f[n] = u[n];
    return f;
}

void record(ParabolicSolution& sol, const std::vector<double>& u, bool keep_full)
{
    const auto& g = *sol.grid;
    std::vector<double> tr(g.boundary().size());
    for (std::size_t k = 0; k < tr.size(); ++k) tr[k] = u[g.boundary()[k].node];
    sol.sigma_trace.push_back(std::move(tr));
    double m = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) m += g.area_weight(n) * u[n];
    sol.mass.push_back(m);
    if (keep_full) sol.full.push_back(u);
}

ParabolicSolution run(const CoefficientSet& c, std::vector<double> u, double T, double tstar, std::size_t nt,
                      const ParabolicOptions& opt, const std::function<void(std::size_t, std::vector<double>&)>& load)
{
    require_unit_kappa(c);
    require(nt >= 64, ErrorCode::invalid_argument, "nt must be at least 64");
    ParabolicSolution sol;
    sol.grid = c.grid;
    sol.op = std::make_shared<const DiffusionOperator>(c);
    sol.T = T;
    sol.tstar = tstar;
    sol.nt = nt;
    sol.time = make_time_grid(T, nt, opt.rannacher);
    sol.tstar_index = sol.time.index_of(tstar);
    ThetaStepper stepper(c, sol.time);
    std::vector<double> f(u.size(), 0.0);
    record(sol, u, opt.keep_full);
    if (sol.tstar_index == 0) sol.snapshot_tstar = to_field(c.grid, u);
    for (std::size_t n = 0; n < sol.time.steps(); ++n) {
        std::fill(f.begin(), f.end(), 0.0);
        load(n, f);
        stepper.forward(n, u, f);
        record(sol, u, opt.keep_full);
        if (n + 1 == sol.tstar_index) sol.snapshot_tstar = to_field(c.grid, u);
    }
    sol.final_state = to_field(c.grid, u);
    return sol;
}

}  // namespace

ParabolicSolution solve_forward_pt_sources(const CoefficientSet& c, const SpaceTimeAtomicMeasure& src, double T,
                                           double tstar, std::size_t nt, const ParabolicOptions& opt)
{
    require(tstar > 0 && tstar < T, ErrorCode::invalid_argument, "need 0 < T* < T");
    const auto& g = *c.grid;
    validate(src, g);
    require_atom_margin(g, src.locations());
    for (const auto& a : src.atoms)
        require(std::abs(a.g.tstar() - tstar) <= 1e-12 * tstar, ErrorCode::admissibility,
                "intensity period differs from T*: the source would not vanish on [T*, T]");
    std::vector<std::array<std::pair<std::size_t, double>, 4>> hats;
    for (const auto& a : src.atoms) hats.push_back(hat_weights(g, a.s));
    std::vector<double> u(g.size(), 0.0);
    const auto time = make_time_grid(T, nt, opt.rannacher);
    return run(c, std::move(u), T, tstar, nt, opt, [&](std::size_t n, std::vector<double>& f) {
        const double tm = time.mid(n);
        if (tm >= tstar) return;
        for (std::size_t j = 0; j < src.atoms.size(); ++j) {
            const double gj = src.atoms[j].g(tm);
            for (const auto& [node, w] : hats[j]) f[node] += gj * w;
        }
    });
}

ParabolicSolution solve_forward_initial_data(const CoefficientSet& c, const AtomicMeasure& mu0, double T,
                                             std::size_t nt, const ParabolicOptions& opt)
{
    require(T > 0, ErrorCode::invalid_argument, "T must be positive");
    const auto& g = *c.grid;
    validate(mu0, g);
    require_atom_margin(g, mu0.locations());
    auto u = hat_load(g, mu0);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] /= g.area_weight(n);
    return run(c, std::move(u), T, 0.0, nt, opt, [](std::size_t, std::vector<double>&) {});
}

ParabolicSolution difference(const ParabolicSolution& a, const ParabolicSolution& b)
{
    require(a.grid == b.grid || (a.grid->size() == b.grid->size()), ErrorCode::shape_mismatch, "grids differ");
    require(a.time.t == b.time.t && a.tstar_index == b.tstar_index, ErrorCode::shape_mismatch, "time grids differ");
    ParabolicSolution d = a;
    for (std::size_t n = 0; n < d.sigma_trace.size(); ++n)
        for (std::size_t k = 0; k < d.sigma_trace[n].size(); ++k) d.sigma_trace[n][k] -= b.sigma_trace[n][k];
    for (std::size_t n = 0; n < d.mass.size(); ++n) d.mass[n] -= b.mass[n];
    d.snapshot_tstar -= b.snapshot_tstar;
    d.final_state -= b.final_state;
    if (!a.full.empty() && !b.full.empty())
        for (std::size_t n = 0; n < d.full.size(); ++n)
            for (std::size_t i = 0; i < d.full[n].size(); ++i) d.full[n][i] -= b.full[n][i];
    else
        d.full.clear();
    return d;
}

namespace {
void check_test_function(const ParabolicSolution& sol, const TimeTestFunction& v)
{
    require(v.grid && v.grid->size() == sol.grid->size(), ErrorCode::shape_mismatch,
            "test function grid differs from the solution grid");
    require(std::abs(v.tstar - sol.tstar) <= 1e-12 * sol.tstar, ErrorCode::shape_mismatch,
            "test function period differs from T*");
}
}  // namespace

ParabolicR functional_R_parabolic(const ParabolicSolution& sol, const TimeTestFunction& v)
{
    check_test_function(sol, v);
    ParabolicR r;
    if (v.K < 0) return r;
    const auto& g = *sol.grid;
    const auto& b = g.boundary();
    const auto& op = *sol.op;
    const std::size_t nmodes = v.modes.size();
    std::vector<std::vector<Complex>> AV(nmodes, std::vector<Complex>(b.size())),
        WV(nmodes, std::vector<Complex>(b.size()));
    std::vector<Complex> tmp(g.size());
    ScalarField vstar(sol.grid);
    for (std::size_t m = 0; m < nmodes; ++m) {
        const auto& V = v.modes[m];
        op.apply(V.values(), tmp);
        for (std::size_t k = 0; k < b.size(); ++k) {
            AV[m][k] = tmp[b[k].node];
            WV[m][k] = op.mass(b[k].node) * V[b[k].node];
        }
        vstar += V;  // every mode is periodic with period T*
    }
    for (std::size_t n = 0; n < g.size(); ++n) r.snapshot += g.area_weight(n) * sol.snapshot_tstar[n] * vstar[n];

    std::vector<Complex> flux(b.size());
    for (std::size_t n = 0; n < sol.tstar_index; ++n) {
        const double dt = sol.time.dt(n), th = sol.time.theta[n];
        std::fill(flux.begin(), flux.end(), Complex{});
        for (int kk = -v.K; kk <= v.K; ++kk) {
            const std::size_t m = static_cast<std::size_t>(kk + v.K);
            const Complex e0 = std::polar(1.0, v.omega(kk) * sol.time.t[n]);
            const Complex e1 = std::polar(1.0, v.omega(kk) * sol.time.t[n + 1]);
            const Complex ew = (1.0 - th) * e1 + th * e0, ed = (e1 - e0) / dt;
            for (std::size_t k = 0; k < b.size(); ++k) flux[k] += AV[m][k] * ew - WV[m][k] * ed;
        }
        Complex s{};
        for (std::size_t k = 0; k < b.size(); ++k) s += sol.trace_theta(n, k) * flux[k];
        r.sigma_minus += dt * s;
    }
    return r;
}

std::vector<double> modal_flux(const TimeTestFunction& v, const DiffusionOperator& op, const TimeGrid& time,
                               std::size_t n)
{
    return modal_flux(v, op, time, n, n + 1).front();
}

std::vector<std::vector<double>> modal_flux(const TimeTestFunction& v, const DiffusionOperator& op,
                                            const TimeGrid& time, std::size_t first, std::size_t last)
{
    const auto& g = op.grid();
    const auto& b = g.boundary();
    std::vector<std::vector<double>> out(last - first, std::vector<double>(b.size(), 0.0));
    if (v.K < 0) return out;
    std::vector<std::vector<Complex>> AV, WV;
    std::vector<Complex> tmp(g.size());
    for (const auto& V : v.modes) {
        op.apply(V.values(), tmp);
        AV.emplace_back(b.size());
        WV.emplace_back(b.size());
        for (std::size_t k = 0; k < b.size(); ++k) {
            AV.back()[k] = tmp[b[k].node] / b[k].weight;
            WV.back()[k] = op.mass(b[k].node) * V[b[k].node] / b[k].weight;
        }
    }
    for (std::size_t n = first; n < last; ++n) {
        const double dt = time.dt(n), th = time.theta[n];
        for (int kk = -v.K; kk <= v.K; ++kk) {
            const std::size_t m = static_cast<std::size_t>(kk + v.K);
            const Complex e0 = std::polar(1.0, v.omega(kk) * time.t[n]);
            const Complex e1 = std::polar(1.0, v.omega(kk) * time.t[n + 1]);
            const Complex ew = (1.0 - th) * e1 + th * e0, ed = (e1 - e0) / dt;
            for (std::size_t k = 0; k < b.size(); ++k) out[n - first][k] += (AV[m][k] * ew - WV[m][k] * ed).real();
        }
    }
    return out;
}

Complex source_pairing_discrete(const ParabolicSolution& sol, const SpaceTimeAtomicMeasure& src,
                                const TimeTestFunction& v)
{
    check_test_function(sol, v);
    if (v.K < 0) return {};
    Complex s{};
    for (std::size_t n = 0; n < sol.tstar_index; ++n) {
        const double th = sol.time.theta[n], tm = sol.time.mid(n);
        for (const auto& a : src.atoms) {
            const Complex w = (1.0 - th) * v.value(a.s, sol.time.t[n + 1]) + th * v.value(a.s, sol.time.t[n]);
            s += sol.time.dt(n) * a.g(tm) * w;
        }
    }
    return s;
}

Complex source_pairing(const SpaceTimeAtomicMeasure& src, const TimeTestFunction& v)
{
    Complex s{};
    if (v.K < 0) return s;
    for (const auto& a : src.atoms)
        for (int k = -v.K; k <= v.K; ++k) s += a.g.coeff(-k) * v.modes[static_cast<std::size_t>(k + v.K)].at(a.s);
    return v.tstar * s;
}

double boundary_pairing(const ParabolicSolution& sol, const BoundaryControl& w)
{
    const auto& b = sol.grid->boundary();
    require(w.first_step + w.omega.size() == sol.time.steps(), ErrorCode::shape_mismatch,
            "control does not cover the remaining time steps");
    double s = 0.0;
    for (std::size_t i = 0; i < w.omega.size(); ++i) {
        const std::size_t n = w.first_step + i;
        require(w.omega[i].size() == b.size(), ErrorCode::shape_mismatch, "control length differs from boundary size");
        double row = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) row += b[k].weight * sol.trace_theta(n, k) * w.omega[i][k];
        s += sol.time.dt(n) * row;
    }
    return s;
}

double functional_R_initial(const ParabolicSolution& sol, const BoundaryControl& w)
{
    require(w.first_step == 0, ErrorCode::shape_mismatch, "the initial-data functional needs a control on all of Sigma");
    return boundary_pairing(sol, w);
}

double sigma_l2(const ParabolicSolution& sol, std::size_t first, std::size_t last)
{
    // same theta-averaged step quadrature as the boundary pairings, so
    // Cauchy-Schwarz against them holds without a quadrature gap
    last = std::min(last, sol.time.t.size() - 1);
    const auto& b = sol.grid->boundary();
    double total = 0.0;
    for (std::size_t n = first; n < last; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double u = sol.trace_theta(n, k);
            s += b[k].weight * u * u;
        }
        total += sol.time.dt(n) * s;
    }
    return std::sqrt(total);
}

void write_sigma_csv(std::ostream& os, const ParabolicSolution& sol)
{
    os << "time,arc,value\n";
    char buf[160];
    const auto& b = sol.grid->boundary();
    for (std::size_t n = 0; n < sol.sigma_trace.size(); ++n)
        for (std::size_t k = 0; k < b.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", sol.time.t[n], b[k].arc, sol.sigma_trace[n][k]);
            os << buf;
        }
}

}  // namespace otstab
