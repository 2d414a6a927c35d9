#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgo/cgo.hpp"
#include "grid/grid.hpp"
#include "measures/measures.hpp"
#include "ot/ot.hpp"

namespace otstab {

enum class ExperimentMode { elliptic, parabolic, initial_data };

const char* to_string(ExperimentMode m);
ExperimentMode parse_mode(const std::string& s);  // invalid_config on unknown names

struct ConstantsConfig {
    double C1 = 1.0, C3 = 1.0, C4 = 1.0, C5 = 1.0;
    bool C1_default = true, C3_default = true;
    bool calibrate = true;
};

struct ControlConfig {
    double epsilon = 1e-6;
    double terminal_tol = 1e-3;
    int max_iter = 500;
    double stop_terminal = 1e-5;  // early exit for the stability chains
};

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::elliptic;
    std::size_t nx = 129, ny = 129;
    Rect domain{{0.1, 0.1}, {1.1, 1.1}};
    std::string kappa = "1", q = "1";
    int sobolev_p = 3;

    MeasureSpec sampling;
    bool identical = false;  // nu = mu
    std::optional<AtomicMeasure> mu, nu;  // explicit spatial measures (elliptic, initial_data)

    CostSpec cost;
    double T = 1.0, tstar = 0.5;
    std::size_t nt = 256;
    int K = 2;
    std::size_t slots = 32;

    BasisOptions basis;
    ControlConfig control;
    ConstantsConfig constants;
    double slack = 0.10;

    std::size_t trials = 1;
    std::uint64_t seed = 1;
    std::string output = "out";
    std::size_t threads = 1;

    /// Mode-dependent checks (T* < T, K >= 0, trials >= 1, ...).
    void validate() const;
};

/// Parses the JSON text; errors carry "source:line: message".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON (sorted keys, %.17g numbers) of the effective configuration.
std::string canonical_json(const ExperimentConfig& c);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace otstab
