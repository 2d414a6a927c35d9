#include "core/error.hpp"

namespace otstab {

const char* error_code_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_geometry: return "invalid-geometry";
    case ErrorCode::duplicate_point: return "duplicate-point";
    case ErrorCode::origin_degeneracy: return "origin-degeneracy";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::ill_posed: return "ill-posed";
    case ErrorCode::margin: return "margin";
    case ErrorCode::admissibility: return "admissibility";
    case ErrorCode::aliasing: return "aliasing";
    case ErrorCode::ambiguous_matching: return "ambiguous-matching";
    case ErrorCode::infeasible_spec: return "infeasible-spec";
    case ErrorCode::imbalance: return "imbalance";
    case ErrorCode::oracle_size: return "oracle-size";
    case ErrorCode::infeasible_duals: return "infeasible-duals";
    case ErrorCode::rho_too_small: return "rho-too-small";
    case ErrorCode::ill_conditioned: return "ill-conditioned";
    case ErrorCode::out_of_band: return "out-of-band";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::io: return "io";
    case ErrorCode::solver_stagnation: return "solver-stagnation";
    case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

}  // namespace otstab
