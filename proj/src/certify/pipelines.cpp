#include "certify/pipelines.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fftw3.h>
#include <sstream>

#include "certify/certify.hpp"
#include "control/control.hpp"
#include "core/dense.hpp"
#include "core/error.hpp"
#include "core/version.hpp"
#include "elliptic/elliptic.hpp"
#include "io/json_writer.hpp"
#include "parabolic/parabolic.hpp"

namespace otstab {

namespace fs = std::filesystem;

namespace {

class Sink {
public:
    Sink(std::string dir, PipelineResult& res) : dir_(std::move(dir)), res_(res) {}

    bool active() const { return !dir_.empty(); }
    void put(const std::string& name, const std::string& body)
    {
        if (!active()) return;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        require(!ec, ErrorCode::io, "cannot create output directory " + dir_);
        std::ofstream out(fs::path(dir_) / name, std::ios::binary);
        require(static_cast<bool>(out), ErrorCode::io, "cannot write " + (fs::path(dir_) / name).string());
        out << body;
        require(static_cast<bool>(out), ErrorCode::io, "write failed for " + name);
        res_.artifacts.push_back(name);
    }

private:
    std::string dir_;
    PipelineResult& res_;
};

CoefficientSet make_coeffs(const ExperimentConfig& c)
{
    return make_coefficients(build_grid(c.nx, c.ny, c.domain), Expression::parse(c.kappa), Expression::parse(c.q),
                             c.sobolev_p);
}

std::pair<AtomicMeasure, AtomicMeasure> spatial_pair(const ExperimentConfig& c)
{
    if (c.mu) return {*c.mu, c.identical || !c.nu ? *c.mu : *c.nu};
    auto p = sample_measure_pair(c.sampling, c.domain, mix_seed(c.seed, 0));
    if (c.identical) p.second = p.first;
    return p;
}

std::pair<SpaceTimeAtomicMeasure, SpaceTimeAtomicMeasure> spacetime_pair(const ExperimentConfig& c)
{
    auto p = sample_spacetime_pair(c.sampling, c.K, c.tstar, c.domain, mix_seed(c.seed, 0));
    if (c.identical) p.second = p.first;
    return p;
}

void require_mode(const ExperimentConfig& c, std::initializer_list<ExperimentMode> ok, const char* pipeline)
{
    for (auto m : ok)
        if (c.mode == m) return;
    fail(ErrorCode::invalid_config, std::string(pipeline) + " does not support mode " + to_string(c.mode));
}

ControlOptions control_options(const ExperimentConfig& c)
{
    ControlOptions o;
    o.epsilon = c.control.epsilon;
    o.terminal_tol = c.control.terminal_tol;
    o.max_iter = c.control.max_iter;
    return o;
}

double sigma_norm(const Grid2D& g, const TimeGrid& time, std::size_t first,
                  const std::vector<std::vector<double>>& f)
{
    double s = 0.0;
    const auto& b = g.boundary();
    for (std::size_t i = 0; i < f.size(); ++i) {
        double row = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) row += b[k].weight * f[i][k] * f[i][k];
        s += time.dt(first + i) * row;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------

PipelineResult forward_elliptic(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    require_mode(cfg, {ExperimentMode::elliptic}, "forward-elliptic");
    const auto c = make_coeffs(cfg);
    const auto mu = spatial_pair(cfg).first;
    const auto sol = solve_forward(c, mu);
    std::ostringstream csv;
    write_trace_csv(csv, *c.grid, sol.boundary_trace);
    sink.put("trace.csv", csv.str());
    JsonObject j;
    j.add("pipeline", "forward-elliptic")
        .add("atoms", mu.size())
        .add("mass_check", sol.mass_check)
        .add("cg_iterations", sol.cg_iterations)
        .add("relative_residual", sol.relative_residual)
        .add("trace_l2", boundary_l2(*c.grid, sol.boundary_trace));
    res.summary = j.dump();
    return res;
}

PipelineResult forward_parabolic(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    require_mode(cfg, {ExperimentMode::parabolic, ExperimentMode::initial_data}, "forward-parabolic");
    const auto c = make_coeffs(cfg);
    ParabolicSolution sol;
    double expected = 1.0;
    if (cfg.mode == ExperimentMode::initial_data) {
        sol = solve_forward_initial_data(c, spatial_pair(cfg).first, cfg.T, cfg.nt);
    } else {
        const auto mu = spacetime_pair(cfg).first;
        expected = mu.total_mass();
        sol = solve_forward_pt_sources(c, mu, cfg.T, cfg.tstar, cfg.nt);
    }
    std::ostringstream csv;
    write_sigma_csv(csv, sol);
    sink.put("sigma.csv", csv.str());
    JsonObject j;
    j.add("pipeline", "forward-parabolic")
        .add("mode", to_string(cfg.mode))
        .add("steps", sol.time.steps())
        .add("mass_final", sol.mass.back())
        .add("mass_expected", expected)
        .add("sigma_l2", sigma_l2(sol));
    res.summary = j.dump();
    return res;
}

PipelineResult ot_pipeline(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    const auto [mu, nu] = spatial_pair(cfg);
    std::vector<CostPoint> xs, ys;
    for (const auto& a : mu.atoms) xs.push_back({a.s});
    for (const auto& a : nu.atoms) ys.push_back({a.s});
    const auto C = cost_matrix(cfg.cost, xs, ys);
    const auto tr = solve_ot(mu.amplitudes(), nu.amplitudes(), C);
    const auto nd = normalize_potentials({tr.phi, tr.psi}, tr.C, cfg.cost.sup_norm(norm(cfg.domain.hi - cfg.domain.lo)));
    std::ostringstream csv;
    write_plan_csv(csv, tr);
    sink.put("plan.csv", csv.str());
    JsonObject j;
    j.add("pipeline", "ot").add("m", mu.size()).add("n", nu.size()).add("cost", tr.cost);
    j.add("plan", std::span<const double>(tr.plan));
    j.add("phi", std::span<const double>(tr.phi)).add("psi", std::span<const double>(tr.psi));
    j.add("phi_normalized", std::span<const double>(nd.phi)).add("psi_normalized", std::span<const double>(nd.psi));
    j.add("duality_gap", duality_gap(tr));
    bool ok = std::abs(duality_gap(tr)) <= 1e-9;
    if (mu.size() <= 4 && nu.size() <= 4) {
        const double bf = brute_force_ot(mu.amplitudes(), nu.amplitudes(), C);
        const bool match = std::abs(bf - tr.cost) <= 1e-9 * (1.0 + tr.cost);
        j.add("brute_force", bf).add("brute_force_match", match);
        ok = ok && match;
    }
    res.status = ok ? 0 : 1;
    res.summary = j.dump();
    return res;
}

PipelineResult cgo_pipeline(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    const auto c = make_coeffs(cfg);
    const auto mu = spatial_pair(cfg).first;
    const auto pts = mu.locations();
    const auto B = build_basis(pts, c, cfg.basis);
    JsonObject j;
    j.add("pipeline", "cgo-basis")
        .add("points", pts.size())
        .add("r_used", B.r_used)
        .add("sigma_min", B.sigma_min)
        .add("norm_A", B.norm_A)
        .add("dominance_bound", B.dominance_bound)
        .add("beta_bound_theory", B.beta_bound_theory)
        .add("beta_bound_measured", B.beta_bound_measured)
        .add("interpolation_error", B.interpolation_error())
        .add("max_sup_psi", B.max_sup_psi)
        .add("uncorrected", B.uncorrected);
    bool ok = B.interpolation_error() <= 1e-8 && B.sigma_min > 0.0;

    // qtilde = 0: the correction vanishes and the raw fields are the bare exponentials
    if (c.qtilde_hp == 0.0) {
        BasisOptions raw = cfg.basis;
        raw.discrete_lift = false;
        const auto R = build_basis(pts, c, raw);
        double dev = 0.0;
        for (std::size_t j2 = 0; j2 < pts.size(); ++j2) {
            const auto rho = make_rho(pts[j2], R.r_used);
            double peak = 0.0, worst = 0.0;
            for (std::size_t n = 0; n < c.grid->size(); ++n) {
                const Complex e = std::exp(rho.dot_x(c.grid->point(n))) / std::sqrt(c.kappa[n].real());
                peak = std::max(peak, std::abs(e));
                worst = std::max(worst, std::abs(R.raw[j2][n] - e));
            }
            dev = std::max(dev, worst / peak);
        }
        CMatrix A(pts.size(), pts.size());
        for (std::size_t l = 0; l < pts.size(); ++l)
            for (std::size_t j2 = 0; j2 < pts.size(); ++j2)
                A(l, j2) = std::exp(make_rho(pts[j2], R.r_used).dot_x(pts[l])) /
                           std::sqrt(c.kappa.at(pts[l]).real() * c.kappa.at(pts[j2]).real());
        const double smin_closed = singular_values(A).back();
        const bool pass = dev <= 1e-12;
        j.add("closed_form_field_deviation", dev)
            .add("sigma_min_closed_form", smin_closed)
            .add("closed_form_check", pass ? "pass" : "fail");
        ok = ok && pass;
    }
    std::ostringstream csv;
    csv << "i,j,re,im\n";
    for (std::size_t l = 0; l < B.A.rows(); ++l)
        for (std::size_t k = 0; k < B.A.cols(); ++k)
            csv << l << ',' << k << ',' << json_number(B.A(l, k).real()) << ',' << json_number(B.A(l, k).imag())
                << '\n';
    sink.put("matrix.csv", csv.str());
    res.status = ok ? 0 : 1;
    res.summary = j.dump();
    return res;
}

struct ControlRun {
    TimeTestFunction v;
    BoundaryControl ctrl;
    double flux_plus = 0.0;  // |d_n v|_{L2(Sigma+)}
    double h1_tstar = 0.0, h1_T = 0.0;
    TimeGrid time;
};

ControlRun control_for(const ExperimentConfig& cfg, const CoefficientSet& c, const SpaceTimeAtomicMeasure& mu,
                       std::ostream* log)
{
    ControlRun r;
    std::vector<BandLimitedIntensity> h;
    for (const auto& a : mu.atoms) h.push_back(a.g);
    BasisOptions bo = cfg.basis;
    bo.time_step = cfg.T / static_cast<double>(cfg.nt);
    r.v = build_time_test_function(mu.locations(), h, c, cfg.tstar, bo);
    r.time = make_time_grid(cfg.T, cfg.nt);
    const ThetaStepper stepper(c, r.time);
    const std::size_t first = r.time.index_of(cfg.tstar);
    const auto ref = modal_flux(r.v, stepper.op(), r.time, first, r.time.steps());
    auto opt = control_options(cfg);
    opt.log = log;
    r.ctrl = solve_null_control(r.v.at(cfg.tstar), stepper, first, ref, opt);
    r.flux_plus = sigma_norm(*c.grid, r.time, first, ref);
    r.h1_tstar = h1_norm(r.v.at(cfg.tstar));
    r.h1_T = h1_norm(r.v.at(cfg.T));
    return r;
}

PipelineResult control_pipeline(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    require_mode(cfg, {ExperimentMode::parabolic}, "control");
    const auto c = make_coeffs(cfg);
    const auto [mu, nu] = spacetime_pair(cfg);
    std::ostringstream log;
    const auto run = control_for(cfg, c, mu, &log);
    const double rel = run.ctrl.target_norm > 0.0 ? run.ctrl.achieved_terminal / run.ctrl.target_norm : 0.0;

    // transfer identity on the sampled pair
    const auto s1 = solve_forward_pt_sources(c, mu, cfg.T, cfg.tstar, cfg.nt);
    const auto s2 = solve_forward_pt_sources(c, nu, cfg.T, cfg.tstar, cfg.nt);
    const double transfer = verify_transfer_identity(difference(s1, s2), run.v.at(cfg.tstar), run.ctrl);

    std::ostringstream csv;
    write_control_csv(csv, *c.grid, run.time, run.ctrl);
    sink.put("control.csv", csv.str());
    sink.put("control_log.jsonl", log.str());
    JsonObject j;
    j.add("pipeline", "control")
        .add("epsilon", run.ctrl.epsilon)
        .add("iterations", run.ctrl.iterations)
        .add("converged", run.ctrl.converged)
        .add("achieved_terminal", run.ctrl.achieved_terminal)
        .add("target_norm", run.ctrl.target_norm)
        .add("relative_terminal", rel)
        .add("control_norm", run.ctrl.control_norm)
        .add("h1_v_tstar", run.h1_tstar)
        .add("h1_v_T", run.h1_T)
        .add("flux_norm_sigma_plus", run.flux_plus)
        .add("transfer_residual", transfer);
    res.status = rel <= cfg.control.terminal_tol && transfer <= 0.05 ? 0 : 1;
    res.summary = j.dump();
    return res;
}

PipelineResult calibrate_pipeline(const ExperimentConfig& cfg, Sink& sink, PipelineResult& res)
{
    const auto c = make_coeffs(cfg);
    JsonObject j;
    j.add("pipeline", "calibrate-constants");
    if (c.qtilde_hp > 0.0) {
        const double rs[] = {2.0, 4.0, 8.0, 16.0, 32.0};
        const auto cal = calibrate_C1(c, {1.0, 0.0}, rs);
        std::ostringstream csv;
        csv << "r,modulus,sup_psi,product\n";
        for (std::size_t i = 0; i < cal.moduli.size(); ++i)
            csv << json_number(rs[i]) << ',' << json_number(cal.moduli[i]) << ',' << json_number(cal.sup_psi[i]) << ','
                << json_number(cal.products[i]) << '\n';
        sink.put("c1_sweep.csv", csv.str());
        j.add("C1", cal.C1).add("qtilde_hp", c.qtilde_hp);
    } else {
        j.add("C1", std::nan("")).add("C1_note", "qtilde vanishes; the correction is zero and C1 is not identifiable");
    }

    // control-norm fit over a family of V_t fields (needs kappa = 1)
    bool unit_kappa = true;
    for (std::size_t n = 0; n < c.kappa.size(); ++n) unit_kappa &= std::abs(c.kappa[n] - Complex(1.0)) <= 1e-14;
    if (unit_kappa && cfg.tstar < cfg.T) {
        std::ostringstream csv;
        csv << "field,control_norm,h1_v_tstar,h1_v_T,flux_norm_sigma_plus,ratio\n";
        double cemp = 0.0;
        const std::size_t fields = std::max<std::size_t>(cfg.trials, 3);
        for (std::size_t f = 0; f < fields; ++f) {
            auto mu = sample_spacetime_pair(cfg.sampling, cfg.K, cfg.tstar, cfg.domain, mix_seed(cfg.seed, f)).first;
            const auto run = control_for(cfg, c, mu, nullptr);
            const double ratio = run.ctrl.control_norm / (run.h1_T + run.flux_plus);
            cemp = std::max(cemp, ratio);
            csv << f << ',' << json_number(run.ctrl.control_norm) << ',' << json_number(run.h1_tstar) << ','
                << json_number(run.h1_T) << ',' << json_number(run.flux_plus) << ',' << json_number(ratio) << '\n';
        }
        sink.put("c_emp.csv", csv.str());
        j.add("C_emp", cemp).add("C_emp_fields", fields);
    } else {
        j.add("C_emp", std::nan("")).add("C_emp_note", "control fit needs kappa = 1 and T* < T");
    }
    res.summary = j.dump();
    return res;
}

PipelineResult stability_pipeline(const ExperimentConfig& cfg, const std::string& dir, PipelineResult& res)
{
    const auto rep = stability_experiment(cfg);
    if (!dir.empty()) {
        write_report_files(dir, rep);
        res.artifacts = {"report.csv", "report.json", "summary.json", "scatter.svg", "manifest.json"};
    }
    std::ostringstream s;
    write_summary_json(s, rep, true);
    res.summary = s.str();
    res.status = rep.all_ok() ? 0 : 1;
    return res;
}

}  // namespace

const std::vector<std::string>& pipeline_names()
{
    static const std::vector<std::string> names{"forward-elliptic", "forward-parabolic", "ot", "cgo-basis",
                                                "control", "calibrate-constants", "stability"};
    return names;
}

PipelineResult run_pipeline(const std::string& name, const ExperimentConfig& cfg, const std::string& out_dir)
{
    cfg.validate();
    PipelineResult res;
    if (name == "stability" || name == "run") return stability_pipeline(cfg, out_dir, res);
    Sink sink(out_dir, res);
    if (name == "forward-elliptic") forward_elliptic(cfg, sink, res);
    else if (name == "forward-parabolic") forward_parabolic(cfg, sink, res);
    else if (name == "ot") ot_pipeline(cfg, sink, res);
    else if (name == "cgo-basis") cgo_pipeline(cfg, sink, res);
    else if (name == "control") control_pipeline(cfg, sink, res);
    else if (name == "calibrate-constants") calibrate_pipeline(cfg, sink, res);
    else fail(ErrorCode::invalid_argument, "unknown pipeline '" + name + "'");
    sink.put("summary.json", res.summary);
    if (sink.active()) {
        write_manifest(out_dir, cfg, name, res.artifacts);
        res.artifacts.push_back("manifest.json");
    }
    return res;
}

void write_manifest(const std::string& dir, const ExperimentConfig& cfg, const std::string& pipeline,
                    const std::vector<std::string>& artifacts)
{
    const std::string canon = canonical_json(cfg);
    const std::string hash = fnv1a_hex(canon);
    std::string body = "{\n  \"config_hash\": " + json_string(hash) + ",\n  \"seed\": " + std::to_string(cfg.seed) +
                       ",\n  \"version\": " + json_string(kVersion) +
                       ",\n  \"fftw\": " + json_string(fftw_version) + ",\n  \"compiler\": " +
                       json_string(__VERSION__) + ",\n  \"pipeline\": " + json_string(pipeline) +
                       ",\n  \"mode\": " + json_string(to_string(cfg.mode)) + ",\n  \"artifacts\": [\n";
    for (std::size_t i = 0; i < artifacts.size(); ++i)
        body += "    {\"file\": " + json_string(artifacts[i]) + ", \"config_hash\": " + json_string(hash) + "}" +
                (i + 1 < artifacts.size() ? ",\n" : "\n");
    body += "  ],\n  \"config\": ";
    for (char ch : canon) {
        body += ch;
        if (ch == '\n') body += "  ";
    }
    body += "\n}\n";
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::io, "cannot create output directory " + dir);
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write manifest.json");
    out << body;
}

}  // namespace otstab
