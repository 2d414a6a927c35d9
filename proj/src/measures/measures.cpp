#include "measures/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "core/error.hpp"

namespace otstab {

std::vector<Vec2> AtomicMeasure::locations() const
{
    std::vector<Vec2> out;
    for (const auto& a : atoms) out.push_back(a.s);
    return out;
}

std::vector<double> AtomicMeasure::amplitudes() const
{
    std::vector<double> out;
    for (const auto& a : atoms) out.push_back(a.a);
    return out;
}

namespace {

void validate_locations(std::span<const Vec2> s, const Grid2D& grid, std::size_t max_atoms)
{
    require(!s.empty(), ErrorCode::admissibility, "measure has no atoms");
    require(max_atoms == 0 || s.size() <= max_atoms, ErrorCode::admissibility, "more atoms than the cap M");
    const auto& r = grid.rect();
    for (std::size_t i = 0; i < s.size(); ++i) {
        require(s[i].x1 > r.lo.x1 && s[i].x1 < r.hi.x1 && s[i].x2 > r.lo.x2 && s[i].x2 < r.hi.x2,
                ErrorCode::admissibility, "atom is not strictly inside the domain");
        for (std::size_t j = 0; j < i; ++j)
            require(!(s[i] == s[j]), ErrorCode::duplicate_point, "atoms share a location");
    }
}

}  // namespace

void validate(const AtomicMeasure& m, const Grid2D& grid, std::size_t max_atoms)
{
    validate_locations(m.locations(), grid, max_atoms);
    double total = 0.0;
    for (const auto& a : m.atoms) {
        require(a.a > 0.0, ErrorCode::admissibility, "amplitudes must be strictly positive");
        total += a.a;
    }
    require(std::abs(total - 1.0) <= 1e-12, ErrorCode::admissibility, "amplitudes must sum to 1");
}

// ---------------------------------------------------------------------------

BandLimitedIntensity::BandLimitedIntensity(int K, double tstar, std::vector<Complex> coeffs)
    : K_(K), tstar_(tstar), c_(std::move(coeffs))
{
    require(K >= 0, ErrorCode::invalid_argument, "band limit K must be nonnegative");
    require(tstar > 0.0, ErrorCode::invalid_argument, "T* must be positive");
    require(c_.size() == static_cast<std::size_t>(2 * K + 1), ErrorCode::shape_mismatch,
            "need 2K+1 Fourier coefficients");
}

BandLimitedIntensity BandLimitedIntensity::constant(double value, double tstar)
{
    return BandLimitedIntensity(0, tstar, {Complex(value)});
}

Complex BandLimitedIntensity::coeff(int k) const
{
    if (k < -K_ || k > K_) return {};
    return c_[static_cast<std::size_t>(k + K_)];
}

Complex BandLimitedIntensity::periodic(double t) const
{
    Complex s{};
    const double w = 2.0 * std::numbers::pi * t / tstar_;
    for (int k = -K_; k <= K_; ++k) s += c_[static_cast<std::size_t>(k + K_)] * std::polar(1.0, w * k);
    return s;
}

double BandLimitedIntensity::operator()(double t) const
{
    if (t < 0.0 || t >= tstar_) return 0.0;
    return periodic(t).real();
}

bool BandLimitedIntensity::conjugate_symmetric(double tol) const
{
    for (int k = 0; k <= K_; ++k)
        if (std::abs(coeff(-k) - std::conj(coeff(k))) > tol) return false;
    return true;
}

double BandLimitedIntensity::sampled_min() const
{
    const std::size_t n = 16 * static_cast<std::size_t>(2 * K_ + 1);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= n; ++i) m = std::min(m, periodic(tstar_ * static_cast<double>(i) / n).real());
    return m;
}

std::vector<Vec2> SpaceTimeAtomicMeasure::locations() const
{
    std::vector<Vec2> out;
    for (const auto& a : atoms) out.push_back(a.s);
    return out;
}

double SpaceTimeAtomicMeasure::total_mass() const
{
    double s = 0.0;
    for (const auto& a : atoms) s += a.g.integral();
    return s;
}

void validate(const SpaceTimeAtomicMeasure& m, const Grid2D& grid, std::size_t max_atoms)
{
    validate_locations(m.locations(), grid, max_atoms);
    for (const auto& a : m.atoms) {
        require(a.g.conjugate_symmetric(), ErrorCode::admissibility, "intensity is not real valued");
        require(a.g.sampled_min() >= -1e-10, ErrorCode::admissibility, "intensity is negative somewhere");
    }
    require(std::abs(m.total_mass() - 1.0) <= 1e-12, ErrorCode::admissibility, "total intensity must be 1");
}

std::vector<SpaceTimeEvent> discretize_in_time(const SpaceTimeAtomicMeasure& m, std::size_t nt)
{
    std::vector<SpaceTimeEvent> ev;
    for (std::size_t j = 0; j < m.atoms.size(); ++j) {
        const auto& g = m.atoms[j].g;
        require(nt > static_cast<std::size_t>(2 * g.K()), ErrorCode::aliasing, "too few time slots for the band");
        const double dt = g.tstar() / static_cast<double>(nt);
        for (std::size_t k = 0; k < nt; ++k) {
            const double t = dt * static_cast<double>(k);
            const double mass = g.periodic(t).real() * dt;
            if (mass > 0.0) ev.push_back({m.atoms[j].s, t, mass, j, k});
        }
    }
    return ev;
}

// ---------------------------------------------------------------------------

BandLimitedIntensity project_GK(std::span<const Complex> samples, int K, double tstar)
{
    require(K >= 0, ErrorCode::invalid_argument, "band limit K must be nonnegative");
    const std::size_t N = samples.size();
    require(N >= 4 * static_cast<std::size_t>(2 * K + 1), ErrorCode::aliasing,
            "need at least 4(2K+1) samples to project onto G_K");
    std::vector<Complex> c(static_cast<std::size_t>(2 * K + 1));
    for (int k = -K; k <= K; ++k) {
        Complex s{};
        for (std::size_t m = 0; m < N; ++m) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(m) / N;
            s += samples[m] * std::polar(1.0, ang);
        }
        c[static_cast<std::size_t>(k + K)] = s / static_cast<double>(N);
    }
    return BandLimitedIntensity(K, tstar, std::move(c));
}

BandLimitedIntensity project_GK(std::span<const double> samples, int K, double tstar)
{
    std::vector<Complex> z(samples.begin(), samples.end());
    auto p = project_GK(std::span<const Complex>(z), K, tstar);
    // enforce exact conjugate symmetry for real input
    std::vector<Complex> c(p.coeffs().begin(), p.coeffs().end());
    for (int k = 1; k <= K; ++k) {
        const Complex avg = 0.5 * (c[static_cast<std::size_t>(K + k)] + std::conj(c[static_cast<std::size_t>(K - k)]));
        c[static_cast<std::size_t>(K + k)] = avg;
        c[static_cast<std::size_t>(K - k)] = std::conj(avg);
    }
    c[static_cast<std::size_t>(K)] = c[static_cast<std::size_t>(K)].real();
    return BandLimitedIntensity(K, tstar, std::move(c));
}

std::vector<Complex> sample_uniform(const BandLimitedIntensity& g, std::size_t N)
{
    std::vector<Complex> out(N);
    for (std::size_t m = 0; m < N; ++m) out[m] = g.periodic(g.tstar() * static_cast<double>(m) / N);
    return out;
}

// ---------------------------------------------------------------------------

namespace {
double min_pairwise(std::span<const Vec2> s)
{
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) d = std::min(d, norm(s[i] - s[j]));
    return d;
}
}  // namespace

SupportPartition partition_supports(std::span<const Vec2> N, std::span<const double> a, std::span<const Vec2> Np,
                                    std::span<const double> b, double tol_match, PartitionMode mode)
{
    require(N.size() == a.size() && Np.size() == b.size(), ErrorCode::shape_mismatch, "locations and masses differ in length");
    require(tol_match >= 0.0, ErrorCode::invalid_argument, "tol_match must be nonnegative");
    const double eta1 = std::min(min_pairwise(N), min_pairwise(Np));
    require(tol_match <= 0.5 * eta1, ErrorCode::ambiguous_matching, "tol_match exceeds half the atom separation");

    SupportPartition p;
    std::vector<bool> nu_used(Np.size(), false);
    for (std::size_t i = 0; i < N.size(); ++i) {
        std::ptrdiff_t match = -1;
        for (std::size_t j = 0; j < Np.size(); ++j)
            if (norm(N[i] - Np[j]) <= tol_match) {
                match = static_cast<std::ptrdiff_t>(j);
                break;
            }
        PartitionEntry e{N[i], static_cast<std::ptrdiff_t>(i), match};
        if (match < 0) {
            p.S1.push_back(e);
        } else {
            nu_used[static_cast<std::size_t>(match)] = true;
            if (mode == PartitionMode::parabolic || a[i] > b[static_cast<std::size_t>(match)]) p.S3.push_back(e);
            else p.S4.push_back(e);
        }
    }
    for (std::size_t j = 0; j < Np.size(); ++j)
        if (!nu_used[j]) p.S2.push_back({Np[j], -1, static_cast<std::ptrdiff_t>(j)});
    return p;
}

SupportPartition partition_supports(const AtomicMeasure& mu, const AtomicMeasure& nu, double tol_match)
{
    const auto N = mu.locations(), Np = nu.locations();
    const auto a = mu.amplitudes(), b = nu.amplitudes();
    return partition_supports(N, a, Np, b, tol_match, PartitionMode::elliptic);
}

SupportPartition partition_supports(const SpaceTimeAtomicMeasure& mu, const SpaceTimeAtomicMeasure& nu,
                                    double tol_match)
{
    const auto N = mu.locations(), Np = nu.locations();
    std::vector<double> a, b;
    for (const auto& x : mu.atoms) a.push_back(x.g.integral());
    for (const auto& x : nu.atoms) b.push_back(x.g.integral());
    return partition_supports(N, a, Np, b, tol_match, PartitionMode::parabolic);
}

// ---------------------------------------------------------------------------

// splitmix64
std::uint64_t Rng::next()
{
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
    Rng r(seed ^ (stream * 0xd1b54a32d192ed03ULL));
    r.next();
    return r.next();
}

namespace {

// Rejection-samples n locations obeying the separations in spec; restarts a stuck partial
// set after 1000 consecutive rejections.
std::vector<Vec2> sample_locations(std::size_t n, const MeasureSpec& spec, const Rect& dom, Rng& rng)
{
    require(n >= 1, ErrorCode::invalid_argument, "need at least one atom");
    const double lo1 = dom.lo.x1 + spec.margin, hi1 = dom.hi.x1 - spec.margin;
    const double lo2 = dom.lo.x2 + spec.margin, hi2 = dom.hi.x2 - spec.margin;
    require(lo1 < hi1 && lo2 < hi2, ErrorCode::infeasible_spec, "margin leaves no room inside the domain");
    std::vector<Vec2> pts;
    std::size_t rejections = 0, streak = 0;
    while (pts.size() < n) {
        const Vec2 p{rng.uniform(lo1, hi1), rng.uniform(lo2, hi2)};
        bool ok = norm(p) >= spec.eta2_min && norm(p) > 0.0;
        for (const auto& q : pts) ok = ok && norm(p - q) >= spec.eta1_min;
        if (ok) {
            pts.push_back(p);
            streak = 0;
            continue;
        }
        if (++rejections > 100000) fail(ErrorCode::infeasible_spec, "separation constraints could not be met after 1e5 rejections");
        if (++streak >= 1000) {
            pts.clear();
            streak = 0;
        }
    }
    return pts;
}

std::vector<double> sample_amplitudes(std::size_t n, Rng& rng)
{
    std::vector<double> a(n);
    double s = 0.0;
    for (auto& x : a) s += (x = rng.uniform(0.2, 1.0));
    for (auto& x : a) x /= s;
    // put the rounding residue on the largest entry so the sum is 1 to the ulp
    double t = 0.0;
    for (std::size_t i = 1; i < n; ++i) t += a[i];
    a[0] = 1.0 - t;
    return a;
}

}  // namespace

AtomicMeasure sample_random_measure(const MeasureSpec& spec, const Rect& domain, std::uint64_t seed)
{
    Rng rng(mix_seed(seed, 1));
    const auto pts = sample_locations(spec.M, spec, domain, rng);
    const auto amp = sample_amplitudes(spec.M, rng);
    AtomicMeasure m;
    for (std::size_t i = 0; i < pts.size(); ++i) m.atoms.push_back({pts[i], amp[i]});
    return m;
}

namespace {
// Indices of mu and nu inside a pool of 2M - shared locations.
std::pair<std::vector<Vec2>, std::vector<Vec2>> split_pool(const MeasureSpec& spec, const Rect& domain, Rng& rng)
{
    const std::size_t M = spec.M;
    const std::size_t shared = static_cast<std::size_t>(rng.next() % (M + 1));
    const auto pool = sample_locations(2 * M - shared, spec, domain, rng);
    std::vector<Vec2> a(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(M));
    std::vector<Vec2> b(pool.begin() + static_cast<std::ptrdiff_t>(M - shared), pool.end());
    return {a, b};
}
}  // namespace

std::pair<AtomicMeasure, AtomicMeasure> sample_measure_pair(const MeasureSpec& spec, const Rect& domain,
                                                            std::uint64_t seed)
{
    Rng rng(mix_seed(seed, 2));
    const auto [sa, sb] = split_pool(spec, domain, rng);
    const auto a = sample_amplitudes(sa.size(), rng);
    const auto b = sample_amplitudes(sb.size(), rng);
    AtomicMeasure mu, nu;
    for (std::size_t i = 0; i < sa.size(); ++i) mu.atoms.push_back({sa[i], a[i]});
    for (std::size_t i = 0; i < sb.size(); ++i) nu.atoms.push_back({sb[i], b[i]});
    return {mu, nu};
}

BandLimitedIntensity sample_intensity(int K, double tstar, double mass, Rng& rng)
{
    const double c0 = mass / tstar;
    std::vector<Complex> c(static_cast<std::size_t>(2 * K + 1));
    c[static_cast<std::size_t>(K)] = c0;
    if (K > 0) {
        std::vector<double> w(static_cast<std::size_t>(K));
        double s = 0.0;
        for (auto& x : w) s += (x = rng.uniform(0.1, 1.0));
        const double budget = rng.uniform(0.3, 0.9);
        for (int k = 1; k <= K; ++k) {
            const double amp = 0.5 * budget * w[static_cast<std::size_t>(k - 1)] / s;
            const Complex alpha = std::polar(amp, 2.0 * std::numbers::pi * rng.uniform());
            c[static_cast<std::size_t>(K + k)] = c0 * alpha;
            c[static_cast<std::size_t>(K - k)] = c0 * std::conj(alpha);
        }
    }
    return BandLimitedIntensity(K, tstar, std::move(c));
}

std::pair<SpaceTimeAtomicMeasure, SpaceTimeAtomicMeasure> sample_spacetime_pair(const MeasureSpec& spec, int K,
                                                                                double tstar, const Rect& domain,
                                                                                std::uint64_t seed)
{
    Rng rng(mix_seed(seed, 3));
    const auto [sa, sb] = split_pool(spec, domain, rng);
    const auto a = sample_amplitudes(sa.size(), rng);
    const auto b = sample_amplitudes(sb.size(), rng);
    SpaceTimeAtomicMeasure mu, nu;
    for (std::size_t i = 0; i < sa.size(); ++i) mu.atoms.push_back({sa[i], sample_intensity(K, tstar, a[i], rng)});
    for (std::size_t i = 0; i < sb.size(); ++i) nu.atoms.push_back({sb[i], sample_intensity(K, tstar, b[i], rng)});
    return {mu, nu};
}

}  // namespace otstab
