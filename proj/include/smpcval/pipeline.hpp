#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "smpcval/config.hpp"

namespace smpcval {

struct PipelineOptions {
    std::filesystem::path out;  ///< artifact directory
    unsigned threads = 0;       ///< 0: all hardware threads
    /// Progress messages; may be empty.
    std::function<void(const std::string&)> log;
    /// Overrides the selection rule with "smallest rho with gamma <= threshold".
    std::optional<double> threshold;
};

namespace artifact {
inline constexpr const char* kTightening = "tightening.json";
inline constexpr const char* kTighteningQ = "tightening_q.csv";
inline constexpr const char* kValidation = "tightening_validation.csv";
inline constexpr const char* kSweep = "sweep.json";
inline constexpr const char* kSweepStats = "sweep_stats.csv";
inline constexpr const char* kSweepG = "sweep_g.csv";
inline constexpr const char* kScenarios = "scenarios.csv";
inline constexpr const char* kDetailStats = "detail_stats.csv";
inline constexpr const char* kDetailG = "detail_g.csv";
inline constexpr const char* kTerminal = "terminal_states.csv";
inline constexpr const char* kTraces = "traces.csv";
inline constexpr const char* kSelection = "selection.json";
inline constexpr const char* kHulls = "fig4_hulls.csv";
inline constexpr const char* kFig1 = "fig1_violation_vs_rho.svg";
inline constexpr const char* kFig2 = "fig2_trajectories.svg";
inline constexpr const char* kFig3 = "fig3_violation_scatter.svg";
inline constexpr const char* kFig4 = "fig4_terminal_hulls.svg";
inline constexpr const char* kManifest = "MANIFEST.json";
}  // namespace artifact

/// Offline stage: tightening profile plus held-out validation.
void run_tighten(const ExperimentConfig& config, const PipelineOptions& options);
/// Closed-loop sweep over the rho grid and the detail rho values; needs the
/// tightening artifact.
void run_sweep(const ExperimentConfig& config, const PipelineOptions& options);
/// Applies the selection rule to the stored sweep statistics.
void run_select(const ExperimentConfig& config, const PipelineOptions& options);
/// Regenerates the figures from stored CSV files only.
void run_report(const ExperimentConfig& config, const PipelineOptions& options);

/// Runs `stage` ("tighten", "sweep", "select", "report" or "run") and records
/// it in the MANIFEST, including the failing stage and message on error (the
/// exception is rethrown).
void run_stage(const std::string& stage, const ExperimentConfig& config,
               const PipelineOptions& options);

}  // namespace smpcval
