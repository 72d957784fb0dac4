#pragma once

#include <string>
#include <vector>

#include "unifiedfl/config.hpp"
#include "unifiedfl/federation.hpp"
#include "unifiedfl/metrics.hpp"

namespace ufl {

struct FoldResult {
    int fold = 0;
    std::uint64_t fold_seed = 0;
    RunHistory history;
    std::vector<ReportRow> rows;  // one per client
};

struct ExperimentResult {
    std::vector<FoldResult> folds;
    std::string out_dir;
};

/// Stable per-client stream seed derived from the fold seed (splitmix64).
std::uint64_t client_seed(std::uint64_t fold_seed, std::uint32_t client);

/// Creates <root>/run_<utc-timestamp>_<mode>; root resolution order:
/// cfg.out_dir, $UNIFIEDFL_OUT, ./runs.
std::string make_run_directory(const ExperimentConfig& cfg);

/// Executes all folds sequentially with seeds cfg.seed + fold and writes
/// events.jsonl, partitions.jsonl, metrics.csv, summary.json,
/// theta_final.uft and config.resolved.json into out_dir. Deterministic
/// given the config.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace ufl
