#include "otstab/otstab.h"

#include <cmath>
#include <cstring>
#include <sstream>
#include <string>

#include "certify/certify.hpp"
#include "certify/pipelines.hpp"
#include "core/dense.hpp"
#include "core/error.hpp"
#include "core/version.hpp"
#include "io/config.hpp"
#include "ot/ot.hpp"

using namespace otstab;

struct otstab_config {
    ExperimentConfig cfg;
};

struct otstab_report {
    StabilityReport rep;
};

static_assert(static_cast<int>(ErrorCode::solver_stagnation) == OTSTAB_SOLVER_STAGNATION);
static_assert(static_cast<int>(ErrorCode::internal) == OTSTAB_INTERNAL);
static_assert(static_cast<int>(ErrorCode::invalid_config) == OTSTAB_INVALID_CONFIG);

namespace {

thread_local std::string g_last_error;

template <class Fn>
otstab_status guarded(Fn&& fn) noexcept
{
    try {
        fn();
        g_last_error.clear();
        return OTSTAB_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<otstab_status>(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return OTSTAB_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OTSTAB_INTERNAL;
    }
}

void need(const void* p, const char* what)
{
    require(p != nullptr, ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s)
{
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::size_t positive(int64_t v, const char* key)
{
    require(v >= 1, ErrorCode::invalid_config, std::string(key) + " must be at least 1");
    return static_cast<std::size_t>(v);
}

}  // namespace

extern "C" {

const char* otstab_version(void) { return kVersion; }

const char* otstab_status_name(otstab_status status)
{
    if (status == OTSTAB_OK) return "ok";
    return error_code_name(static_cast<ErrorCode>(status));
}

const char* otstab_last_error(void) { return g_last_error.c_str(); }

otstab_status otstab_config_from_file(const char* path, otstab_config** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new otstab_config{load_config(path)};
    });
}

otstab_status otstab_config_from_string(const char* json, const char* source, otstab_config** out)
{
    return guarded([&] {
        need(json, "json");
        need(out, "out");
        *out = new otstab_config{parse_config(json, source ? source : "<string>")};
    });
}

otstab_status otstab_config_default(otstab_config** out)
{
    return guarded([&] {
        need(out, "out");
        *out = new otstab_config{};
    });
}

otstab_status otstab_config_set_int(otstab_config* c, const char* key, int64_t v)
{
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        auto& g = c->cfg;
        const std::string k = key;
        if (k == "trials") g.trials = positive(v, key);
        else if (k == "seed") {
            require(v >= 0, ErrorCode::invalid_config, "seed must be nonnegative");
            g.seed = static_cast<std::uint64_t>(v);
        } else if (k == "threads") g.threads = positive(v, key);
        else if (k == "nx") g.nx = positive(v, key);
        else if (k == "ny") g.ny = positive(v, key);
        else if (k == "nt") g.nt = positive(v, key);
        else if (k == "K") {
            require(v >= 0, ErrorCode::invalid_config, "K must be nonnegative");
            g.K = static_cast<int>(v);
        } else if (k == "M") g.sampling.M = positive(v, key);
        else if (k == "slots") g.slots = positive(v, key);
        else if (k == "max_iter") g.control.max_iter = static_cast<int>(positive(v, key));
        else fail(ErrorCode::invalid_config, "unknown integer key '" + k + "'");
    });
}

otstab_status otstab_config_set_double(otstab_config* c, const char* key, double v)
{
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        require(std::isfinite(v), ErrorCode::invalid_config, "value must be finite");
        auto& g = c->cfg;
        const std::string k = key;
        if (k == "T") g.T = v;
        else if (k == "tstar") g.tstar = v;
        else if (k == "slack") g.slack = v;
        else if (k == "epsilon") g.control.epsilon = v;
        else if (k == "terminal_tol") g.control.terminal_tol = v;
        else if (k == "stop_terminal") g.control.stop_terminal = v;
        else if (k == "eta1_min") g.sampling.eta1_min = v;
        else if (k == "eta2_min") g.sampling.eta2_min = v;
        else if (k == "margin") g.sampling.margin = v;
        else fail(ErrorCode::invalid_config, "unknown real key '" + k + "'");
    });
}

otstab_status otstab_config_set_string(otstab_config* c, const char* key, const char* value)
{
    return guarded([&] {
        need(c, "config");
        need(key, "key");
        need(value, "value");
        auto& g = c->cfg;
        const std::string k = key, v = value;
        if (k == "mode") {
            g.mode = parse_mode(v);
            if (g.mode == ExperimentMode::parabolic && g.cost.kind == CostKind::truncated_euclidean)
                g.cost.kind = CostKind::spacetime;
            if (g.mode != ExperimentMode::parabolic && g.cost.kind == CostKind::spacetime)
                g.cost.kind = CostKind::truncated_euclidean;
        } else if (k == "output") {
            g.output = v;
        } else if (k == "kappa" || k == "q") {
            (void)Expression::parse(v);
            (k == "kappa" ? g.kappa : g.q) = v;
        } else if (k == "cost") {
            if (v == "truncated_euclidean") g.cost.kind = CostKind::truncated_euclidean;
            else if (v == "scaled_squared") g.cost.kind = CostKind::scaled_squared;
            else if (v == "spacetime") g.cost.kind = CostKind::spacetime;
            else fail(ErrorCode::invalid_config, "unknown cost kind '" + v + "'");
        } else {
            fail(ErrorCode::invalid_config, "unknown string key '" + k + "'");
        }
    });
}

const char* otstab_config_output(const otstab_config* c) { return c ? c->cfg.output.c_str() : ""; }

otstab_status otstab_config_hash(const otstab_config* c, char out[17])
{
    return guarded([&] {
        need(c, "config");
        need(out, "out");
        const auto h = fnv1a_hex(canonical_json(c->cfg));
        std::memcpy(out, h.c_str(), 17);
    });
}

otstab_status otstab_config_json(const otstab_config* c, char** out)
{
    return guarded([&] {
        need(c, "config");
        need(out, "out");
        *out = dup_string(canonical_json(c->cfg));
    });
}

void otstab_config_free(otstab_config* c) { delete c; }

otstab_status otstab_run(const otstab_config* c, otstab_report** out)
{
    return guarded([&] {
        need(c, "config");
        need(out, "out");
        *out = new otstab_report{stability_experiment(c->cfg)};
    });
}

otstab_status otstab_report_summary(const otstab_report* r, otstab_summary* out)
{
    return guarded([&] {
        need(r, "report");
        need(out, "out");
        const auto& p = r->rep;
        *out = otstab_summary{p.max_ratio, p.min_margin, p.failures,  p.runtime_s, p.rows.size(),
                              p.all_ok(),  p.line_log10, p.C1,        p.scale_log10};
    });
}

size_t otstab_report_trial_count(const otstab_report* r) { return r ? r->rep.rows.size() : 0; }

otstab_status otstab_report_trial(const otstab_report* r, size_t i, otstab_trial* out)
{
    return guarded([&] {
        need(r, "report");
        need(out, "out");
        require(i < r->rep.rows.size(), ErrorCode::invalid_argument, "trial index out of range");
        const auto& t = r->rep.rows[i];
        *out = otstab_trial{t.trial,           t.seed,           t.ok,          t.chain_ok,        t.T_c,
                            t.J,               t.R1_minus_R2,    t.atom_level,  t.boundary_misfit, t.bound_formula,
                            t.certificate_log10, t.empirical_ratio, t.margin,    t.identity_residual,
                            t.transfer_residual, t.eta1,          t.eta2,        t.R0,              t.r,
                            t.sigma_min};
    });
}

const char* otstab_report_trial_error(const otstab_report* r, size_t i)
{
    if (!r || i >= r->rep.rows.size()) return "";
    return r->rep.rows[i].error.c_str();
}

otstab_status otstab_report_write(const otstab_report* r, const char* dir)
{
    return guarded([&] {
        need(r, "report");
        need(dir, "dir");
        write_report_files(dir, r->rep);
    });
}

otstab_status otstab_report_csv(const otstab_report* r, char** out)
{
    return guarded([&] {
        need(r, "report");
        need(out, "out");
        std::ostringstream os;
        write_report_csv(os, r->rep);
        *out = dup_string(os.str());
    });
}

void otstab_report_free(otstab_report* r) { delete r; }

otstab_status otstab_pipeline(const otstab_config* c, const char* name, const char* out_dir, char** summary,
                              int* check_status)
{
    return guarded([&] {
        need(c, "config");
        need(name, "name");
        const auto res = run_pipeline(name, c->cfg, out_dir ? out_dir : "");
        if (summary) *summary = dup_string(res.summary);
        if (check_status) *check_status = res.status;
    });
}

void otstab_string_free(char* s) { delete[] s; }

otstab_status otstab_ot_solve(const double* a, size_t m, const double* b, size_t n, const double* cost,
                              double* total, double* plan, double* phi, double* psi)
{
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        need(cost, "cost");
        require(m >= 1 && n >= 1, ErrorCode::invalid_argument, "empty marginal");
        CostMatrix C{m, n, std::vector<double>(cost, cost + m * n)};
        const auto r = solve_ot(std::span(a, m), std::span(b, n), C);
        if (total) *total = r.cost;
        if (plan) std::copy(r.plan.begin(), r.plan.end(), plan);
        if (phi) std::copy(r.phi.begin(), r.phi.end(), phi);
        if (psi) std::copy(r.psi.begin(), r.psi.end(), psi);
    });
}

otstab_status otstab_ot_brute_force(const double* a, size_t m, const double* b, size_t n, const double* cost,
                                    double* total)
{
    return guarded([&] {
        need(a, "a");
        need(b, "b");
        need(cost, "cost");
        need(total, "total");
        require(m >= 1 && n >= 1, ErrorCode::invalid_argument, "empty marginal");
        CostMatrix C{m, n, std::vector<double>(cost, cost + m * n)};
        *total = brute_force_ot(std::span(a, m), std::span(b, n), C);
    });
}

otstab_status otstab_smallest_singular_value(const double* re, const double* im, size_t n, double* out)
{
    return guarded([&] {
        need(re, "re");
        need(out, "out");
        require(n >= 1, ErrorCode::invalid_argument, "empty matrix");
        CMatrix A(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) A(i, j) = Complex(re[i * n + j], im ? im[i * n + j] : 0.0);
        *out = singular_values(A).back();
    });
}

}  // extern "C"
