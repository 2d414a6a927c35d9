#pragma once

#include <stdexcept>
#include <string>

namespace otstab {

// Mirrors otstab_status in the C header; keep the numeric values in sync.
enum class ErrorCode : int {
    invalid_argument = 1,
    invalid_geometry = 2,
    duplicate_point = 3,
    origin_degeneracy = 4,
    shape_mismatch = 5,
    ill_posed = 6,
    margin = 7,
    admissibility = 8,
    aliasing = 9,
    ambiguous_matching = 10,
    infeasible_spec = 11,
    imbalance = 12,
    oracle_size = 13,
    infeasible_duals = 14,
    rho_too_small = 15,
    ill_conditioned = 16,
    out_of_band = 17,
    invalid_config = 18,
    io = 19,
    solver_stagnation = 20,
    internal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what)
{
    if (!cond) fail(code, what);
}

}  // namespace otstab
