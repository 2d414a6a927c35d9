#include "cgo/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "core/error.hpp"
#include "core/fft.hpp"

namespace otstab {

RhoVector make_rho(Vec2 s, double r)
{
    require(!(s.x1 == 0.0 && s.x2 == 0.0), ErrorCode::origin_degeneracy, "rho direction is the origin");
    require(r > 0.0 && std::isfinite(r), ErrorCode::invalid_argument, "rho scale must be positive");
    return {{r * s.x1, r * s.x2}, {-r * s.x2, r * s.x1}};
}

// ---------------------------------------------------------------------------

struct CgoSolver::Box {
    std::size_t n0, n1;  // points along x1, x2
    Fft2D fft;
    std::vector<Complex> qt;     // cut-off potential
    std::vector<Complex> shift;  // e^{i theta.x}
    std::vector<Vec2> freq;      // k + theta
    Box(std::size_t a, std::size_t b) : n0(a), n1(b), fft(b, a) {}
};

CgoSolver::~CgoSolver() = default;
CgoSolver::CgoSolver(CgoSolver&&) noexcept = default;

std::size_t CgoSolver::box_n0() const { return box_->n0; }
std::size_t CgoSolver::box_n1() const { return box_->n1; }

CgoSolver::CgoSolver(GridPtr grid, std::vector<Complex> qt_box, const ScalarField& kappa)
    : grid_(std::move(grid)), kappa_(kappa)
{
    require(qt_box.size() == 4 * (grid_->nx() - 1) * (grid_->ny() - 1), ErrorCode::shape_mismatch,
            "box potential has the wrong size");
    init_box(qt_box);
}

Vec2 CgoSolver::box_point(const Grid2D& g, std::size_t m0, std::size_t m1)
{
    const double off0 = static_cast<double>((g.nx() - 1) / 2), off1 = static_cast<double>((g.ny() - 1) / 2);
    return {g.origin().x1 + (static_cast<double>(m0) - off0) * g.hx(),
            g.origin().x2 + (static_cast<double>(m1) - off1) * g.hy()};
}

namespace {
// C2 step: 1 for d <= d0, 0 for d >= d1.
double smooth_step(double d, double d0, double d1)
{
    if (d <= d0) return 1.0;
    if (d >= d1) return 0.0;
    const double t = (d - d0) / (d1 - d0);
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}
}  // namespace

double CgoSolver::cutoff(const Grid2D& g, Vec2 x)
{
    const auto& r = g.rect();
    const Vec2 L = g.extent();
    const double d1 = std::max({r.lo.x1 - x.x1, x.x1 - r.hi.x1, 0.0});
    const double d2 = std::max({r.lo.x2 - x.x2, x.x2 - r.hi.x2, 0.0});
    return smooth_step(d1, 0.1 * L.x1, 0.4 * L.x1) * smooth_step(d2, 0.1 * L.x2, 0.4 * L.x2);
}

CgoSolver::CgoSolver(const CoefficientSet& c, Complex extra) : grid_(c.grid), kappa_(c.kappa)
{
    const auto& g = *grid_;
    const std::size_t n0 = 2 * (g.nx() - 1), n1 = 2 * (g.ny() - 1);
    std::vector<double> root(n0 * n1, 0.0), qk(n0 * n1, 0.0);
    std::vector<bool> valid(n0 * n1, false);
    for (std::size_t m1 = 0; m1 < n1; ++m1)
        for (std::size_t m0 = 0; m0 < n0; ++m0) {
            const Vec2 x = box_point(g, m0, m1);
            const double k = c.kappa_expr(x.x1, x.x2), q = c.q_expr(x.x1, x.x2);
            const std::size_t id = m1 * n0 + m0;
            if (std::isfinite(k) && k > 0.0 && std::isfinite(q)) {
                valid[id] = true;
                root[id] = std::sqrt(k);
                qk[id] = q / k;
            }
        }
    std::vector<Complex> qt(n0 * n1);
    for (std::size_t m1 = 0; m1 < n1; ++m1)
        for (std::size_t m0 = 0; m0 < n0; ++m0) {
            const std::size_t id = m1 * n0 + m0;
            const double chi = cutoff(g, box_point(g, m0, m1));
            if (chi == 0.0) continue;
            const std::size_t l = m1 * n0 + (m0 + n0 - 1) % n0, r = m1 * n0 + (m0 + 1) % n0;
            const std::size_t d = ((m1 + n1 - 1) % n1) * n0 + m0, u = ((m1 + 1) % n1) * n0 + m0;
            require(valid[id] && valid[l] && valid[r] && valid[d] && valid[u], ErrorCode::invalid_config,
                    "kappa or q is not usable near the domain (needed for the CGO extension)");
            const double lap = (root[l] - 2 * root[id] + root[r]) / (g.hx() * g.hx()) +
                               (root[d] - 2 * root[id] + root[u]) / (g.hy() * g.hy());
            qt[id] = chi * (Complex(qk[id] + lap / root[id]) - extra);
        }
    init_box(qt);
}

void CgoSolver::init_box(const std::vector<Complex>& qt)
{
    const auto& g = *grid_;
    const std::size_t n0 = 2 * (g.nx() - 1), n1 = 2 * (g.ny() - 1);
    box_ = std::make_unique<Box>(n0, n1);
    box_->qt = qt;
    const double pi = std::numbers::pi;
    const double L0 = static_cast<double>(n0) * g.hx(), L1 = static_cast<double>(n1) * g.hy();
    const Vec2 theta{pi / L0, pi / L1};  // half a frequency cell
    box_->shift.resize(n0 * n1);
    box_->freq.resize(n0 * n1);
    for (std::size_t m1 = 0; m1 < n1; ++m1)
        for (std::size_t m0 = 0; m0 < n0; ++m0) {
            const Vec2 x = box_point(g, m0, m1);
            box_->shift[m1 * n0 + m0] = std::polar(1.0, dot(theta, x));
            const auto wave = [](std::size_t m, std::size_t n) {
                return static_cast<double>(m < (n + 1) / 2 ? static_cast<std::ptrdiff_t>(m)
                                                           : static_cast<std::ptrdiff_t>(m) - static_cast<std::ptrdiff_t>(n));
            };
            box_->freq[m1 * n0 + m0] = {2 * pi * wave(m0, n0) / L0 + theta.x1, 2 * pi * wave(m1, n1) / L1 + theta.x2};
        }
}

CGOSolution CgoSolver::uncorrected(const RhoVector& rho) const
{
    CGOSolution out;
    out.rho = rho;
    out.psi = ScalarField(grid_);
    out.v = ScalarField(grid_);
    const auto& g = *grid_;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const Complex e = rho.dot_x(g.point(n));
        require(e.real() < 700.0, ErrorCode::ill_conditioned, "e^{rho.x} overflows double precision; reduce r");
        out.v[n] = std::exp(e) / std::sqrt(kappa_[n].real());
    }
    return out;
}

CGOSolution CgoSolver::solve(const RhoVector& rho) const
{
    const double mod = rho.modulus();
    require(mod > 0.0, ErrorCode::invalid_argument, "|rho| must be positive");
    const auto& B = *box_;
    const std::size_t N = B.n0 * B.n1;

    std::vector<Complex> inv_symbol(N);
    for (std::size_t id = 0; id < N; ++id) {
        const Vec2 xi = B.freq[id];
        const Complex s(-dot(xi, xi) - 2.0 * dot(rho.b, xi), 2.0 * dot(rho.a, xi));
        inv_symbol[id] = std::abs(s) > 0.0 ? 1.0 / s : 0.0;
    }

    std::vector<Complex> psi(N, 0.0), work(N);
    bool zero_forcing = std::all_of(B.qt.begin(), B.qt.end(), [](Complex z) { return z == Complex{}; });
    CGOSolution out;
    out.rho = rho;
    double change = 0.0;
    int it = 0;
    if (!zero_forcing) {
        for (it = 1;; ++it) {
            for (std::size_t id = 0; id < N; ++id) work[id] = B.qt[id] * (1.0 + psi[id]) * std::conj(B.shift[id]);
            B.fft.forward(work);
            for (std::size_t id = 0; id < N; ++id) work[id] *= inv_symbol[id];
            B.fft.inverse(work);
            double diff = 0.0, size = 0.0;
            for (std::size_t id = 0; id < N; ++id) {
                const Complex next = work[id] * B.shift[id];
                diff = std::max(diff, std::abs(next - psi[id]));
                size = std::max(size, std::abs(next));
                psi[id] = next;
            }
            change = size > 0.0 ? diff / size : 0.0;
            if (!std::isfinite(size) || size > 1e6)
                fail(ErrorCode::rho_too_small, "CGO fixed-point iteration diverged; |rho| too small for this potential");
            if (change <= 1e-10) break;
            if (it >= 200) fail(ErrorCode::rho_too_small, "CGO fixed-point iteration did not contract within 200 steps");
        }
    }
    out.iterations = it;
    out.residual = change;

    const auto& g = *grid_;
    const std::size_t off0 = (g.nx() - 1) / 2, off1 = (g.ny() - 1) / 2;
    out.psi = ScalarField(grid_);
    out.v = ScalarField(grid_);
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t n = g.index(i, j);
            const Complex p = psi[(j + off1) * B.n0 + (i + off0)];
            out.psi[n] = p;
            out.sup_psi = std::max(out.sup_psi, std::abs(p));
            const Complex e = rho.dot_x(g.point(n));
            require(e.real() < 700.0, ErrorCode::ill_conditioned, "e^{rho.x} overflows double precision; reduce r");
            out.v[n] = std::exp(e) * (1.0 + p) / std::sqrt(kappa_[n].real());
        }
    return out;
}

// ---------------------------------------------------------------------------

double rtilde(std::size_t n, double eta1, double eta2, double qnorm, double C1)
{
    require(n >= 1, ErrorCode::invalid_argument, "rtilde needs n >= 1");
    require(eta1 > 0.0 && eta2 > 0.0, ErrorCode::invalid_argument, "separations must be positive");
    const double first = std::isinf(eta1) ? 0.0 : 2.0 / (eta1 * eta1);
    return 2.0 * static_cast<double>(n) * (first + (1.0 + C1 * qnorm) / (std::numbers::sqrt2 * eta2));
}

double precision_cap_r(std::span<const Vec2> points, const Rect& domain, double growth)
{
    const Vec2 corners[4] = {domain.lo, {domain.hi.x1, domain.lo.x2}, domain.hi, {domain.lo.x1, domain.hi.x2}};
    // s.x is linear, so its maximum over the rectangle sits at a corner
    double worst = 0.0;
    for (const auto& s : points)
        for (const auto& sl : points)
            for (const auto& x : corners) worst = std::max(worst, dot(s, x) - 0.5 * (dot(s, s) + dot(sl, sl)));
    return worst > 0.0 ? std::log(growth) / worst : std::numeric_limits<double>::infinity();
}

double InterpolationBasis::interpolation_error() const
{
    double e = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < points.size(); ++j)
            e = std::max(e, std::abs(basis[i].at(points[j]) - (i == j ? 1.0 : 0.0)));
    return e;
}

namespace {

InterpolationBasis assemble(std::span<const Vec2> points, const CoefficientSet& c, const CgoSolver& solver,
                            const DiffusionOperator& op, Complex shift, double r, double C1, bool lift)
{
    const auto& g = *c.grid;
    const auto sp = separation_params(points, g);
    const std::size_t n = points.size();
    InterpolationBasis B;
    B.points.assign(points.begin(), points.end());
    B.r_used = r;
    B.shift = shift;
    B.eta1 = sp.eta1;
    B.eta2 = sp.eta2;

    std::optional<DirichletLift> lifter;
    if (lift) lifter.emplace(op, shift);
    std::vector<double> kap(n);
    for (std::size_t j = 0; j < n; ++j) kap[j] = c.kappa.at(points[j]).real();

    for (std::size_t j = 0; j < n; ++j) {
        const auto rho = make_rho(points[j], r);
        CGOSolution sol;
        try {
            sol = solver.solve(rho);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::rho_too_small || !lift) throw;
            sol = solver.uncorrected(rho);
            ++B.uncorrected;
        }
        B.max_sup_psi = std::max(B.max_sup_psi, sol.sup_psi);
        ScalarField vt = Complex(1.0 / std::sqrt(kap[j])) * sol.v;
        if (lifter) vt = lifter->lift(vt);
        B.raw.push_back(std::move(vt));
    }
    B.A = CMatrix(n, n);
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) B.A(l, j) = B.raw[j].at(points[l]);

    // relative deviation from the closed form e^{rho_j.s_l}/sqrt(kappa_l kappa_j)
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) {
            const Complex closed = std::exp(make_rho(points[j], r).dot_x(points[l])) / std::sqrt(kap[l] * kap[j]);
            B.correction_measured = std::max(B.correction_measured, std::abs(B.A(l, j) / closed - 1.0));
        }

    // Equilibrate with the diagonal: A = D Ah D. Conditioning is judged on Ah,
    // and sigma_min(A) = 1 / |A^{-1}|_2 keeps relative accuracy when the
    // diagonal spans many orders of magnitude.
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j) d[j] = std::sqrt(std::abs(B.A(j, j)));
    require(std::all_of(d.begin(), d.end(), [](double x) { return x > 0.0 && std::isfinite(x); }),
            ErrorCode::ill_conditioned, "interpolation matrix has a zero or non-finite diagonal entry");
    CMatrix At(n, n);
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t j = 0; j < n; ++j) At(j, l) = B.A(l, j) / (d[l] * d[j]);
    const auto sv_hat = singular_values(At);
    if (!(sv_hat.back() > 1e-12 * sv_hat.front()))
        fail(ErrorCode::ill_conditioned, "interpolation matrix is numerically singular");
    const CMatrix inv = LuFactor(At).inverse();
    B.coef = CMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) B.coef(i, j) = inv(i, j) / (d[i] * d[j]);

    B.norm_A = norm2(B.A);
    B.sigma_min = 1.0 / norm2(B.coef);
    B.dominance_bound = beta_lower_bound(B.A);
    const double kmax = c.kappa_c0;
    const double lead = std::exp(r * sp.eta2 * sp.eta2) / kmax;
    const double sep = std::isinf(sp.eta1) ? 0.0 : std::exp(-r * sp.eta1 * sp.eta1 / 2.0);
    B.beta_bound_theory =
        lead * (1.0 - static_cast<double>(n) * (sep + C1 * c.qtilde_hp / (std::numbers::sqrt2 * r * sp.eta2)));
    B.beta_bound_measured = lead * (1.0 - static_cast<double>(n) * (sep + B.correction_measured));

    for (std::size_t i = 0; i < n; ++i) {
        ScalarField v(c.grid);
        for (std::size_t j = 0; j < n; ++j) v += B.coef(i, j) * B.raw[j];
        B.basis.push_back(std::move(v));
    }
    return B;
}

double choose_r(std::span<const Vec2> points, const CoefficientSet& c, const BasisOptions& opt, double qnorm)
{
    const auto sp = separation_params(points, *c.grid);
    switch (opt.mode) {
    case RMode::given:
        require(opt.r > 0.0, ErrorCode::invalid_argument, "given r must be positive");
        return opt.r;
    case RMode::auto_r: return rtilde(points.size(), sp.eta1, sp.eta2, qnorm, opt.C1);
    case RMode::capped:
        return std::min(rtilde(points.size(), sp.eta1, sp.eta2, qnorm, opt.C1), precision_cap_r(points, c.grid->rect(), opt.growth));
    }
    return opt.r;
}

InterpolationBasis build_with_retries(std::span<const Vec2> points, const CoefficientSet& c, const BasisOptions& opt,
                                      Complex extra, double qnorm)
{
    require(!points.empty(), ErrorCode::invalid_argument, "basis needs at least one point");
    CgoSolver solver(c, extra);
    DiffusionOperator op(c);
    double r = choose_r(points, c, opt, qnorm);
    const int retries = opt.mode == RMode::auto_r ? 3 : 0;
    for (int attempt = 0;; ++attempt) {
        try {
            return assemble(points, c, solver, op, extra, r, opt.C1, opt.discrete_lift);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ill_conditioned || attempt >= retries) throw;
            r *= 2.0;
        }
    }
}

}  // namespace

InterpolationBasis build_basis(std::span<const Vec2> points, const CoefficientSet& coeffs, const BasisOptions& opt)
{
    return build_with_retries(points, coeffs, opt, {}, coeffs.qtilde_hp);
}

InterpolationBasis conjugate(const InterpolationBasis& b)
{
    InterpolationBasis c = b;
    c.shift = std::conj(b.shift);
    for (std::size_t i = 0; i < b.A.rows(); ++i)
        for (std::size_t j = 0; j < b.A.cols(); ++j) {
            c.A(i, j) = std::conj(b.A(i, j));
            c.coef(i, j) = std::conj(b.coef(i, j));
        }
    for (auto* fields : {&c.raw, &c.basis})
        for (auto& f : *fields)
            for (auto& z : f.values()) z = std::conj(z);
    return c;
}

InterpolationBasis build_basis_mode_k(std::span<const Vec2> points, const CoefficientSet& coeffs, int k, int K,
                                      double tstar, const BasisOptions& opt)
{
    require(std::abs(k) <= K, ErrorCode::out_of_band, "mode index outside the band |k| <= K");
    require(tstar > 0.0, ErrorCode::invalid_argument, "T* must be positive");
    if (k < 0) return conjugate(build_basis_mode_k(points, coeffs, -k, K, tstar, opt));
    double omega = 2.0 * std::numbers::pi * k / tstar;
    if (opt.time_step > 0.0) {
        require(omega * opt.time_step < 0.5 * std::numbers::pi, ErrorCode::invalid_argument,
                "time step too coarse for the band");
        omega = 2.0 / opt.time_step * std::tan(0.5 * omega * opt.time_step);
    }
    // r_K uses |q| + omega_K sqrt|Omega| in place of |qtilde|
    const double qnorm = coeffs.qtilde_hp + 2.0 * std::numbers::pi * K * std::sqrt(coeffs.grid->area()) / tstar;
    return build_with_retries(points, coeffs, opt, Complex(0.0, omega), qnorm);
}

// ---------------------------------------------------------------------------

double TimeTestFunction::omega(int k) const { return 2.0 * std::numbers::pi * k / tstar; }

ScalarField TimeTestFunction::at(double t) const
{
    ScalarField f(grid);
    for (int k = -K; k <= K; ++k) f += std::polar(1.0, omega(k) * t) * modes[static_cast<std::size_t>(k + K)];
    for (auto& z : f.values()) z = z.real();
    return f;
}

Complex TimeTestFunction::value(Vec2 x, double t) const
{
    Complex s{};
    for (int k = -K; k <= K; ++k) s += std::polar(1.0, omega(k) * t) * modes[static_cast<std::size_t>(k + K)].at(x);
    return s;
}

double TimeTestFunction::max_h1(std::size_t samples) const
{
    double m = 0.0;
    if (K < 0) return 0.0;
    for (std::size_t i = 0; i < samples; ++i) m = std::max(m, h1_norm(at(tstar * static_cast<double>(i) / samples)));
    return m;
}

TimeTestFunction build_time_test_function(std::span<const Vec2> points, std::span<const BandLimitedIntensity> h,
                                          const CoefficientSet& coeffs, double tstar, const BasisOptions& opt,
                                          int K_override)
{
    require(points.size() == h.size(), ErrorCode::shape_mismatch, "one intensity per point is required");
    TimeTestFunction v;
    v.tstar = tstar;
    v.grid = coeffs.grid;
    int K = -1;
    for (const auto& g : h) K = std::max(K, g.K());
    if (K_override != -2) K = K_override;
    v.K = K;
    if (K < 0 || points.empty()) {
        v.K = -1;
        return v;
    }
    v.modes.assign(static_cast<std::size_t>(2 * K + 1), ScalarField(coeffs.grid));
    v.bases.resize(static_cast<std::size_t>(2 * K + 1));
    for (int k = 0; k <= K; ++k) {
        auto basis = build_basis_mode_k(points, coeffs, k, K, tstar, opt);
        for (int sgn : {1, -1}) {
            if (k == 0 && sgn < 0) continue;
            const int kk = sgn * k;
            const auto& b = sgn > 0 ? basis : (v.bases[static_cast<std::size_t>(kk + K)] = conjugate(basis));
            auto& mode = v.modes[static_cast<std::size_t>(kk + K)];
            for (std::size_t j = 0; j < points.size(); ++j) mode += h[j].coeff(kk) * b.basis[j];
        }
        v.bases[static_cast<std::size_t>(k + K)] = std::move(basis);
    }
    return v;
}

// ---------------------------------------------------------------------------

C1Calibration calibrate_C1(const CoefficientSet& coeffs, Vec2 direction, std::span<const double> r_values)
{
    require(coeffs.qtilde_hp > 0.0, ErrorCode::invalid_argument, "C1 calibration needs a nonzero qtilde");
    CgoSolver solver(coeffs);
    C1Calibration cal;
    for (double r : r_values) {
        const auto rho = make_rho(direction, r);
        const auto sol = solver.solve(rho);
        cal.moduli.push_back(rho.modulus());
        cal.sup_psi.push_back(sol.sup_psi);
        cal.products.push_back(rho.modulus() * sol.sup_psi);
        cal.C1 = std::max(cal.C1, rho.modulus() * sol.sup_psi / coeffs.qtilde_hp);
    }
    return cal;
}

}  // namespace otstab
