// Command-line harness over the C API. Exit codes: 0 all checks pass,
// 1 trial or check failure (or a runtime error), 2 invalid config or usage.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <regex>
#include <string>

#include <CLI11.hpp>

#include "otstab/otstab.h"

namespace {

struct Overrides {
    std::string config;
    std::string mode;
    std::optional<long long> trials, seed, threads;
    std::string out;
    std::string grid;
};

int report_error(otstab_status st)
{
    std::cerr << "error: " << otstab_last_error() << " [" << otstab_status_name(st) << "]\n";
    return (st == OTSTAB_INVALID_CONFIG || st == OTSTAB_INVALID_ARGUMENT) ? 2 : 1;
}

struct ConfigDeleter {
    void operator()(otstab_config* c) const { otstab_config_free(c); }
};
using ConfigPtr = std::unique_ptr<otstab_config, ConfigDeleter>;

// Accepts 129x129, 129X129 and 129×129.
bool parse_grid(const std::string& s, long long& nx, long long& ny)
{
    static const std::regex re(R"(^\s*(\d+)\s*(?:x|X|\xC3\x97)\s*(\d+)\s*$)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) return false;
    nx = std::stoll(m[1]);
    ny = std::stoll(m[2]);
    return true;
}

otstab_status apply(otstab_config* cfg, const Overrides& o)
{
    otstab_status st = OTSTAB_OK;
    auto chain = [&](otstab_status s) {
        if (st == OTSTAB_OK) st = s;
    };
    if (!o.mode.empty()) chain(otstab_config_set_string(cfg, "mode", o.mode.c_str()));
    if (o.trials) chain(otstab_config_set_int(cfg, "trials", *o.trials));
    if (o.seed) chain(otstab_config_set_int(cfg, "seed", *o.seed));
    if (o.threads) chain(otstab_config_set_int(cfg, "threads", *o.threads));
    if (!o.out.empty()) chain(otstab_config_set_string(cfg, "output", o.out.c_str()));
    if (!o.grid.empty() && st == OTSTAB_OK) {
        long long nx = 0, ny = 0;
        if (!parse_grid(o.grid, nx, ny)) {
            std::cerr << "error: --grid expects NXxNY, got '" << o.grid << "'\n";
            return OTSTAB_INVALID_ARGUMENT;
        }
        chain(otstab_config_set_int(cfg, "nx", nx));
        chain(otstab_config_set_int(cfg, "ny", ny));
    }
    return st;
}

int execute(const std::string& pipeline, const Overrides& o)
{
    otstab_config* raw = nullptr;
    otstab_status st = o.config.empty() ? otstab_config_default(&raw) : otstab_config_from_file(o.config.c_str(), &raw);
    if (st != OTSTAB_OK) return report_error(st);
    ConfigPtr cfg(raw);
    st = apply(cfg.get(), o);
    if (st == OTSTAB_INVALID_ARGUMENT && std::string(otstab_last_error()).empty()) return 2;
    if (st != OTSTAB_OK) return report_error(st);

    const std::string out_dir = otstab_config_output(cfg.get());
    char* summary = nullptr;
    int check = 1;
    st = otstab_pipeline(cfg.get(), pipeline.c_str(), out_dir.c_str(), &summary, &check);
    if (st != OTSTAB_OK) return report_error(st);
    std::cout << summary;
    otstab_string_free(summary);
    std::cerr << pipeline << ": " << (check == 0 ? "ok" : "FAILED") << ", artifacts in " << out_dir << "\n";
    return check == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Transport-distance stability experiments for inverse source problems", "otstab_cli"};
    app.set_version_flag("--version", std::string(otstab_version()));
    app.require_subcommand(1);

    Overrides o;
    app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--mode", o.mode, "elliptic, parabolic or initial_data");
    app.add_option("--trials", o.trials, "Number of trials");
    app.add_option("--seed", o.seed, "Base seed");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--grid", o.grid, "Grid cells as NXxNY");
    app.add_option("--threads", o.threads, "Worker threads for trials");

    const std::pair<const char*, const char*> commands[] = {
        {"run", "Stability experiment of the configured mode"},
        {"stability", "Stability experiment of the configured mode"},
        {"forward-elliptic", "Solve the elliptic forward problem and write its boundary trace"},
        {"forward-parabolic", "Solve the parabolic forward problem and write the lateral trace norm"},
        {"ot", "Exact OT between the configured measures, with duals and a brute-force check"},
        {"cgo-basis", "Build the CGO interpolation basis and report its conditioning"},
        {"control", "Penalized null control for the adjoint heat state"},
        {"calibrate-constants", "Sweep estimate of C1 and the control-norm fit"},
    };
    std::string chosen;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        sub->callback([&chosen, n = std::string(name)] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return execute(chosen, o);
}
