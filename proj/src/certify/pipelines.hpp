#pragma once

#include <string>
#include <vector>

#include "io/config.hpp"

namespace otstab {

struct PipelineResult {
    std::string summary;  // JSON object
    int status = 0;       // 0 all checks passed, 1 a reported check failed
    std::vector<std::string> artifacts;
};

/// forward-elliptic, forward-parabolic, ot, cgo-basis, control, calibrate-constants, stability
const std::vector<std::string>& pipeline_names();

/// Runs one pipeline; artifacts and manifest.json go to out_dir (nothing is
/// written when it is empty). Errors propagate as otstab::Error.
PipelineResult run_pipeline(const std::string& name, const ExperimentConfig& cfg, const std::string& out_dir);

/// manifest.json listing the artifacts with the hash of the effective config.
void write_manifest(const std::string& dir, const ExperimentConfig& cfg, const std::string& pipeline,
                    const std::vector<std::string>& artifacts);

}  // namespace otstab
