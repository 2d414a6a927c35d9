#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "grid/grid.hpp"

namespace otstab {

struct Atom {
    Vec2 s;
    double a;
};

/// Finite sum of weighted Dirac masses with unit total mass.
struct AtomicMeasure {
    std::vector<Atom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }
    std::vector<Vec2> locations() const;
    std::vector<double> amplitudes() const;
};

/// Checks positivity, unit mass, distinctness, strict interiority and the
/// atom cap (max_atoms = 0 disables it). Throws admissibility errors.
void validate(const AtomicMeasure& m, const Grid2D& grid, std::size_t max_atoms = 0);

/// g(t) = sum_{|k|<=K} c_k exp(2 pi i k t / T*) on [0, T*), zero afterwards.
class BandLimitedIntensity {
public:
    BandLimitedIntensity() = default;
    BandLimitedIntensity(int K, double tstar, std::vector<Complex> coeffs);
    static BandLimitedIntensity constant(double value, double tstar);

    int K() const noexcept { return K_; }
    double tstar() const noexcept { return tstar_; }
    Complex coeff(int k) const;  // zero outside the band
    std::span<const Complex> coeffs() const noexcept { return c_; }

    /// Trigonometric sum without the cutoff at T*.
    Complex periodic(double t) const;
    /// g(t) with the H4 extension by zero on [T*, inf).
    double operator()(double t) const;
    double integral() const { return tstar_ * c_[K_].real(); }
    bool conjugate_symmetric(double tol = 1e-12) const;
    /// min over the 16(2K+1)-point uniform sample of [0, T*].
    double sampled_min() const;

private:
    int K_ = 0;
    double tstar_ = 1.0;
    std::vector<Complex> c_;  // index k + K
};

struct SpaceTimeAtom {
    Vec2 s;
    BandLimitedIntensity g;
};

struct SpaceTimeAtomicMeasure {
    std::vector<SpaceTimeAtom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }
    std::vector<Vec2> locations() const;
    double total_mass() const;
};

void validate(const SpaceTimeAtomicMeasure& m, const Grid2D& grid, std::size_t max_atoms = 0);

/// Space-time atoms (s_j, t_m) with t_m = m T*/nt carrying mass g_j(t_m) T*/nt.
/// The rectangle rule is exact on G_K for nt > 2K, so the total mass is 1.
struct SpaceTimeEvent {
    Vec2 s;
    double t;
    double mass;
    std::size_t atom;
    std::size_t slot;
};
std::vector<SpaceTimeEvent> discretize_in_time(const SpaceTimeAtomicMeasure& m, std::size_t nt);

/// Orthogonal projection onto G_K of samples g(m T*/N), m = 0..N-1.
/// Needs N >= 4(2K+1) (aliasing error otherwise).
BandLimitedIntensity project_GK(std::span<const Complex> samples, int K, double tstar);
BandLimitedIntensity project_GK(std::span<const double> samples, int K, double tstar);

/// Values of g at m T*/N, m = 0..N-1 (periodic sum, no cutoff).
std::vector<Complex> sample_uniform(const BandLimitedIntensity& g, std::size_t N);

struct PartitionEntry {
    Vec2 s;
    std::ptrdiff_t mu_index = -1;  // -1 when s is not an atom of mu
    std::ptrdiff_t nu_index = -1;
};

struct SupportPartition {
    std::vector<PartitionEntry> S1, S2, S3, S4;
};

enum class PartitionMode { elliptic, parabolic };

/// Locations closer than tol_match are the same point. Elliptic mode splits
/// the common support by a_s > b_s (S3) versus the rest (S4); parabolic mode
/// keeps it whole in S3.
SupportPartition partition_supports(std::span<const Vec2> N, std::span<const double> a, std::span<const Vec2> Np,
                                    std::span<const double> b, double tol_match, PartitionMode mode);
SupportPartition partition_supports(const AtomicMeasure& mu, const AtomicMeasure& nu, double tol_match = 1e-12);
SupportPartition partition_supports(const SpaceTimeAtomicMeasure& mu, const SpaceTimeAtomicMeasure& nu,
                                    double tol_match = 1e-12);

struct MeasureSpec {
    std::size_t M = 3;
    double eta1_min = 0.25;
    double eta2_min = 0.2;
    double margin = 0.05;  // distance to the boundary
};

/// Deterministic 64-bit stream with a portable uniform double.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

AtomicMeasure sample_random_measure(const MeasureSpec& spec, const Rect& domain, std::uint64_t seed);

/// A pair with a random number of shared locations (exact coordinates); all
/// distinct locations of the union obey the separation spec.
std::pair<AtomicMeasure, AtomicMeasure> sample_measure_pair(const MeasureSpec& spec, const Rect& domain,
                                                            std::uint64_t seed);

/// Random nonnegative intensity in G_K with the given total mass.
BandLimitedIntensity sample_intensity(int K, double tstar, double mass, Rng& rng);

std::pair<SpaceTimeAtomicMeasure, SpaceTimeAtomicMeasure> sample_spacetime_pair(const MeasureSpec& spec, int K,
                                                                                double tstar, const Rect& domain,
                                                                                std::uint64_t seed);

}  // namespace otstab
