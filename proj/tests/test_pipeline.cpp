#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "smpcval/artifacts.hpp"
#include "smpcval/config.hpp"
#include "smpcval/error.hpp"
#include "smpcval/pipeline.hpp"

using namespace smpcval;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = SMPCVAL_SOURCE_DIR "/configs";

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("smpcval_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig zero_config() {
    ExperimentConfig c = load_config(kConfigs / "zero_disturbance.cfg");
    apply_fast_profile(c);
    return c;
}

PipelineOptions options(const fs::path& out) {
    PipelineOptions o;
    o.out = out;
    o.threads = 2;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// File name -> content of every artifact except the manifest (which holds timestamps).
std::map<std::string, std::string> artifacts(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename() != artifact::kManifest) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SMPCVAL_CLI + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, StagesComposeToRun) {
    const ExperimentConfig c = zero_config();
    const fs::path staged = scratch("staged"), whole = scratch("whole");
    for (const char* stage : {"tighten", "sweep", "select", "report"}) run_stage(stage, c, options(staged));
    run_stage("run", c, options(whole));
    const auto a = artifacts(staged), b = artifacts(whole);
    EXPECT_EQ(a, b);
    for (const char* name : {artifact::kTightening, artifact::kSweep, artifact::kSweepStats, artifact::kSweepG,
                             artifact::kScenarios, artifact::kDetailStats, artifact::kTraces,
                             artifact::kSelection, artifact::kFig1, artifact::kFig2, artifact::kFig3,
                             artifact::kFig4, artifact::kHulls})
        EXPECT_TRUE(a.count(name)) << name;

    const nlohmann::json manifest = read_json(whole / artifact::kManifest);
    EXPECT_EQ(manifest.at("status"), "ok");
    EXPECT_EQ(manifest.at("config_hash"), c.hash());
}

TEST(Pipeline, UndisturbedGammaCurveIsZero) {
    const ExperimentConfig c = zero_config();
    const fs::path out = scratch("zero");
    run_stage("run", c, options(out));
    const CsvTable stats = read_csv(out / artifact::kSweepStats);
    EXPECT_EQ(comment_value(stats, "config_hash"), c.hash());
    EXPECT_EQ(stats.values.rows(), static_cast<Eigen::Index>(c.sweep.fast_n_C));
    for (const char* col : {"gamma", "g_avg", "g_max", "xi"})
        EXPECT_TRUE(stats.values.col(stats.column(col)).isZero(0.0)) << col;
    const std::string svg = slurp(out / artifact::kFig1);
    EXPECT_NE(svg.find(c.hash()), std::string::npos);
}

TEST(Pipeline, ReportIsByteIdenticalOnRepeat) {
    const ExperimentConfig c = zero_config();
    const fs::path out = scratch("report");
    run_stage("run", c, options(out));
    const auto first = artifacts(out);
    run_stage("report", c, options(out));
    EXPECT_EQ(artifacts(out), first);
}

TEST(Pipeline, HugeThresholdSelectsSmallestRho) {
    const ExperimentConfig c = zero_config();
    const fs::path out = scratch("threshold");
    run_stage("tighten", c, options(out));
    run_stage("sweep", c, options(out));
    PipelineOptions o = options(out);
    o.threshold = 1e9;
    run_stage("select", c, o);
    const nlohmann::json sel = read_json(out / artifact::kSelection);
    EXPECT_EQ(sel.at("rho").get<double>(), c.sweep.rho_min);
    EXPECT_EQ(sel.at("policy"), "smallest_rho_below");
}

TEST(Pipeline, MissingUpstreamArtifactIsReported) {
    const ExperimentConfig c = zero_config();
    const fs::path out = scratch("missing");
    EXPECT_THROW(run_stage("sweep", c, options(out)), MissingArtifactError);
    const nlohmann::json manifest = read_json(out / artifact::kManifest);
    EXPECT_EQ(manifest.at("status"), "failed");
    EXPECT_EQ(manifest.at("failed_stage"), "sweep");
    EXPECT_THROW(run_stage("report", c, options(out)), MissingArtifactError);
}

TEST(Pipeline, StaleUpstreamArtifactIsRejected) {
    ExperimentConfig c = zero_config();
    const fs::path out = scratch("stale");
    run_stage("tighten", c, options(out));
    apply_seed_override(c, 100);
    EXPECT_THROW(run_stage("sweep", c, options(out)), ConfigError);
}

TEST(Cli, ExitCodes) {
    const fs::path out = scratch("cli");
    const std::string zero = (kConfigs / "zero_disturbance.cfg").string();
    EXPECT_EQ(run_cli("sweep --config " + zero + " --fast --quiet --out " + out.string()), 4);
    EXPECT_EQ(run_cli("run --config /nonexistent.cfg --out " + out.string()), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);

    const fs::path bad = out / "bad.cfg";
    {
        std::string text = slurp(zero);
        text.replace(text.find("\"epsilon\": 0.05"), 15, "\"epsilon\": 1.5");
        std::ofstream(bad) << text;
    }
    EXPECT_EQ(run_cli("tighten --config " + bad.string() + " --out " + out.string()), 2);
    EXPECT_EQ(run_cli("run --config " + zero + " --fast --quiet --threads 1 --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / artifact::kSelection));
}
