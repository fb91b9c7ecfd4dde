#pragma once

#include "alignlab/domains.hpp"
#include "alignlab/io.hpp"
#include "alignlab/training.hpp"

#include <string>
#include <vector>

namespace alignlab {

// Exit codes shared by the library pipelines and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;
inline constexpr int kExitNoFeasible = 2;
inline constexpr int kExitUsage = 64;

extern const char* const kVersion;

std::vector<std::string> pipeline_commands();

// Resolves the domain pair and training configuration from a run config.
DomainPair resolve_pair(const RunConfig& cfg);
TrainConfig resolve_train(const RunConfig& cfg);

// Executes one named pipeline, writing its CSV/JSON outputs plus
// manifest.json into out_dir (created if missing). Returns an exit code;
// infeasibility outcomes map to kExitNoFeasible, contract violations to
// kExitContract.
int run_command(const std::string& command, const RunConfig& cfg,
                const std::string& out_dir, int jobs = 1);

}  // namespace alignlab
