#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smpcval/closedloop.hpp"
#include "smpcval/probval.hpp"
#include "smpcval/smpc.hpp"
#include "smpcval/uncertainty.hpp"

namespace smpcval {

struct TighteningConfig {
    double epsilon = 0.05;
    double delta = 1e-6;
    std::optional<std::int64_t> r;        ///< explicit discarding parameter
    std::optional<double> r_ratio;        ///< or: largest r with r / S(r) <= ratio
    std::uint64_t seed = 1;
    std::int64_t validation_samples = 100000;
    std::uint64_t validation_seed = 2;
};

struct SweepConfig {
    double epsilon = 0.05;
    double delta = 1e-6;
    std::int64_t r = 1;
    double rho_min = 1.0;
    double rho_max = 1e6;
    std::size_t n_C = 100;
    std::size_t fast_n_C = 10;
    Eigen::Index M = 20;
    std::uint64_t seed = 3;
    std::optional<std::int64_t> sample_count;  ///< lower bound on S_rho
    SlackMode slack_mode = SlackMode::Shared;
    GSum g_sum = GSum::Inclusive;
    std::vector<double> detail_rhos;  ///< extra rho values run on the same batch
    std::size_t trace_limit = 100;    ///< scenarios per detail rho written to traces.csv
};

struct ExperimentConfig {
    std::string source;  ///< file the config was read from

    Matrix A, B, C, D;
    Vector h;
    InputSet input_set;
    Box initial_state_box;
    double sample_time = 0.0;

    Matrix Q, R;
    int N = 0;
    std::optional<Matrix> K;

    DisturbanceModel disturbance;
    TighteningConfig tightening;
    SweepConfig sweep;
    SelectionRule selection;

    std::filesystem::path output_dir;
    bool write_svg = true;
    bool fast = false;

    /// Normalized document of the effective settings (overrides applied).
    nlohmann::json effective;

    /// Hash of the effective settings; written into every artifact.
    std::string hash() const;
    /// Rho grid of the sweep stage (fast profile honored).
    std::vector<double> grid() const;
    LtiSystem system() const;
};

/// Parses JSON text with comments. Errors are ConfigErrors of the form
/// "<source>:<line>: <field>: <problem>". Relative paths inside the document
/// resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>",
                              const std::filesystem::path& base_dir = {});

/// Reads and parses a config file; a missing file is a ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// tightening.seed = K, tightening.validation_seed = K + 1, sweep.seed = K + 2.
void apply_seed_override(ExperimentConfig& config, std::uint64_t seed);

/// Switches the sweep to fast_n_C grid points.
void apply_fast_profile(ExperimentConfig& config);

/// Line numbers of every value in a JSON text, keyed by JSON pointer.
class JsonLineIndex {
public:
    explicit JsonLineIndex(const std::string& text);
    /// Line of the value at `pointer`, else of its closest ancestor (1 if none).
    int line_of(const std::string& pointer) const;

private:
    std::map<std::string, int> lines_;
};

}  // namespace smpcval
