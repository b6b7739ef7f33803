// smpcval: tighten / sweep / select / report pipeline driver.

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "smpcval/config.hpp"
#include "smpcval/error.hpp"
#include "smpcval/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitMissing = 4;

struct Options {
    std::string config;
    std::string out;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold;
    bool fast = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config, "experiment config file")->required();
    cmd->add_option("--out", o.out, "artifact directory (default: output.directory of the config)");
    cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores")->capture_default_str();
    cmd->add_option("--seed-override", o.seed,
                    "replace the seeds: tightening K, validation K+1, sweep K+2");
    cmd->add_flag("--fast", o.fast, "sweep over sweep.fast_n_C grid points");
    cmd->add_flag("--quiet", o.quiet, "no progress messages");
}

int execute(const std::string& stage, const Options& o) {
    smpcval::ExperimentConfig config = smpcval::load_config(o.config);
    if (o.seed) smpcval::apply_seed_override(config, *o.seed);
    if (o.fast) smpcval::apply_fast_profile(config);

    smpcval::PipelineOptions po;
    po.out = o.out.empty() ? config.output_dir : std::filesystem::path(o.out);
    po.threads = o.threads;
    po.threshold = o.threshold;
    const auto start = std::chrono::steady_clock::now();
    if (!o.quiet) {
        po.log = [start](const std::string& msg) {
            const double t =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cerr << "[" << std::fixed << std::setprecision(1) << t << "s] " << msg << '\n';
        };
    }
    smpcval::run_stage(stage, config, po);
    if (!o.quiet) std::cerr << "artifacts in " << po.out.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic validation of penalty-based stochastic MPC"};
    app.require_subcommand(1);
    Options opts;
    std::string stage;
    for (const char* name : {"run", "tighten", "sweep", "select", "report"}) {
        const char* help = std::string(name) == "run"       ? "all stages in order"
                           : std::string(name) == "tighten" ? "offline constraint tightening"
                           : std::string(name) == "sweep"   ? "closed-loop sweep over the rho grid"
                           : std::string(name) == "select"  ? "choose rho from the sweep statistics"
                                                            : "figures from the stored CSV files";
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd, opts);
        if (std::string(name) == "select" || std::string(name) == "run")
            cmd->add_option("--threshold", opts.threshold,
                            "pick the smallest rho with gamma <= threshold");
        cmd->callback([&stage, name] { stage = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        return execute(stage, opts);
    } catch (const smpcval::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const smpcval::MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kExitMissing;
    } catch (const smpcval::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const smpcval::DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
