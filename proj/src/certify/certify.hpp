#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cgo/cgo.hpp"
#include "io/config.hpp"
#include "measures/measures.hpp"
#include "ot/ot.hpp"

namespace otstab {

struct EllipticCertificateParams {
    std::size_t M = 1;
    double eta1 = 0.0;  // +inf for a single point
    double eta2 = 0.0;
    double R0 = 0.0;
    double kappa_c0 = 1.0;
    double cost_sup = 1.0;
    double qtilde_norm = 0.0;
    double C1 = 1.0, C3 = 1.0;
};

struct Certificate {
    double r = 0.0;           // r-tilde or r_K
    double log10_value = 0.0; // the value itself overflows for realistic separations
    double value = 0.0;       // +inf when it does not fit in a double
    std::string note;
};

/// C3 |kappa|_C0 |c|_inf M rt exp(rt (R0^2 - eta2^2)), rt = 4M(2/eta1^2 + (1 + C1 |qt|)/(sqrt2 eta2)).
Certificate certificate_elliptic(const EllipticCertificateParams& p, bool default_constants = true);

struct ParabolicCertificateParams {
    std::size_t n = 1;  // interpolation points, at most 2M
    int K = 0;
    double eta1 = 0.0, eta2 = 0.0;
    double tstar = 1.0, T = 2.0;
    double q_norm = 0.0;
    double area = 1.0;
    double C1 = 1.0;
};

struct ParabolicCertificate {
    double r_K = 0.0;
    double structural = 0.0;  // sqrt(n^2 (2K+1) / T*)
    std::string note;
};

/// r_K = 2n(2/eta1^2 + (1 + C1(|q| + 2 pi K sqrt|Omega| / T*))/(sqrt2 eta2)).
ParabolicCertificate certificate_parabolic(const ParabolicCertificateParams& p);

/// Combined elliptic test function over the support union S.
struct CombinedElliptic {
    std::vector<Vec2> points;     // S1, S2, S3, S4 in that order
    std::vector<double> targets;  // phi on S1 and S3, -psi on S2 and S4
    ScalarField v;                // real part of sum targets_i v_i
    InterpolationBasis basis;
    double atom_level = 0.0;      // sum_N a v*(s) - sum_N' b v*(s) with the prescribed values
    double atom_level_field = 0.0;// same with v* read off the grid field
    double identity_rhs = 0.0;    // sum_{S3,S4} |a-b| w + sum_S1 a phi + sum_S2 b psi
};

/// Duals are indexed like the atoms of mu (phi) and nu (psi).
CombinedElliptic combine_elliptic(const DualPair& duals, const SupportPartition& partition, const AtomicMeasure& mu,
                                  const AtomicMeasure& nu, const CoefficientSet& coeffs, const BasisOptions& opt);

struct CombinedParabolic {
    std::vector<Vec2> points;                     // S1, S2, S3
    std::vector<std::vector<double>> selected;    // [point][slot] values before projection
    std::vector<BandLimitedIntensity> h;          // projected time signals
    TimeTestFunction v;
    double atom_level = 0.0;  // event sums of mu minus nu against the selected values
    double projected = 0.0;   // closed-form pairing of the sources with v
};

/// Events come from discretize_in_time with `slots` slots; duals are indexed like those events.
CombinedParabolic combine_parabolic(const DualPair& duals, const SupportPartition& partition,
                                    const SpaceTimeAtomicMeasure& mu, const SpaceTimeAtomicMeasure& nu,
                                    const std::vector<SpaceTimeEvent>& ev_mu, const std::vector<SpaceTimeEvent>& ev_nu,
                                    std::size_t slots, const CoefficientSet& coeffs, double tstar,
                                    const BasisOptions& opt);

struct TrialRow {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    bool ok = false;  // stage errors leave this false
    std::string error;
    std::size_t n_mu = 0, n_nu = 0;
    double T_c = 0.0;
    double J = 0.0;
    double R1_minus_R2 = 0.0;
    double atom_level = 0.0;
    double boundary_misfit = 0.0;
    double bound_formula = 0.0;       // |R| <= bound_formula * misfit
    double formula_log10 = 0.0;       // certificate with C3 (or C4, C5) = 1
    double certificate_log10 = 0.0;   // after calibration
    double empirical_ratio = 0.0;
    double combine_gap = 0.0;         // atom-level identity of the combined test function
    double identity_residual = 0.0;   // boundary evaluation against the atom-level value
    double transfer_residual = 0.0;   // parabolic only
    double control_terminal = 0.0;    // relative terminal error of the control
    double margin = 0.0;
    bool chain_ok = false;
    bool below_certificate = false;
    double eta1 = 0.0, eta2 = 0.0, R0 = 0.0, r = 0.0;
    double sigma_min = 0.0;
    double runtime_s = 0.0;
};

struct StabilityReport {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<TrialRow> rows;
    double C1 = 1.0;
    double scale_log10 = 0.0;  // log10 of the calibrated C3 / C4 / C5
    bool calibrated = false;
    double line_log10 = 0.0;   // slope of the certificate line in the scatter plot
    double max_ratio = 0.0;
    double min_margin = 0.0;
    std::size_t failures = 0;
    double runtime_s = 0.0;
    std::string constants_note;

    bool all_ok() const { return failures == 0; }
};

/// Runs every trial (worker pool of config.threads), then calibrates and summarizes.
StabilityReport stability_experiment(const ExperimentConfig& config);

/// One row per trial, numbers as %.17g.
void write_report_csv(std::ostream& os, const StabilityReport& r);
/// {max_ratio, min_margin, failures, runtime_s} plus labelled metadata; runtime is
/// left out when `with_runtime` is false so reruns compare byte for byte.
void write_summary_json(std::ostream& os, const StabilityReport& r, bool with_runtime = true);
/// Summary without runtime plus every row; byte-identical across reruns.
void write_report_json(std::ostream& os, const StabilityReport& r);
/// log-log scatter of T_c against the misfit with the certificate line.
void write_scatter_svg(std::ostream& os, const StabilityReport& r);
/// Writes report.csv, report.json, summary.json, scatter.svg and manifest.json into `dir`.
void write_report_files(const std::string& dir, const StabilityReport& r);

std::string format_double(double x);  // %.17g, "nan", "inf", "-inf"

}  // namespace otstab
