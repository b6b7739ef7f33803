#include "smpcval/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <sstream>

#include "smpcval/artifacts.hpp"
#include "smpcval/closedloop.hpp"
#include "smpcval/error.hpp"
#include "smpcval/plots.hpp"
#include "smpcval/tightening.hpp"

namespace smpcval {

using nlohmann::json;

namespace {

void say(const PipelineOptions& o, const std::string& msg) {
    if (o.log) o.log(msg);
}

Provenance provenance(const ExperimentConfig& c) {
    return {c.hash(),
            {{"tightening", c.tightening.seed},
             {"validation", c.tightening.validation_seed},
             {"sweep", c.sweep.seed}}};
}

json header(const ExperimentConfig& c, const std::string& artifact) {
    json j = provenance(c).to_json();
    j["artifact"] = artifact;
    j["profile"] = c.fast ? "fast" : "full";
    return j;
}

json matrix_json(const Matrix& M) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json stats_json(const SweepResult& r) {
    json out = json::array();
    for (const auto& s : r.stats)
        out.push_back({{"rho", s.rho}, {"gamma", s.gamma}, {"g_avg", s.g_avg}, {"g_max", s.g_max}, {"xi", s.xi}});
    return out;
}

json levels_json(const ProbabilisticLevels& l) {
    return {{"epsilon", l.epsilon}, {"delta", l.delta}, {"r", l.r}, {"multiplicity", l.multiplicity}};
}

void check_provenance(const json& doc, const ExperimentConfig& c, const std::filesystem::path& path) {
    const std::string stored = doc.value("config_hash", std::string());
    if (stored != c.hash())
        throw ConfigError(path.string() + " was produced by a different configuration (config hash " +
                          stored + ", current " + c.hash() + "); rerun the upstream stage");
}

void check_provenance(const CsvTable& t, const ExperimentConfig& c, const std::filesystem::path& path) {
    const std::string stored = comment_value(t, "config_hash");
    if (stored != c.hash())
        throw ConfigError(path.string() + " was produced by a different configuration (config hash " +
                          stored + ", current " + c.hash() + "); rerun the upstream stage");
}

ControllerDesign design_of(const ExperimentConfig& c, const LtiSystem& sys) {
    return make_design(sys, c.Q, c.R, c.N, c.K);
}

ProbabilisticLevels tightening_levels(const ExperimentConfig& c, const LtiSystem& sys) {
    ProbabilisticLevels lv;
    lv.epsilon = c.tightening.epsilon;
    lv.delta = c.tightening.delta;
    lv.multiplicity = sys.nh() * c.N;
    lv.r = c.tightening.r ? *c.tightening.r
                          : discarding_from_ratio(lv.epsilon, lv.delta, lv.multiplicity,
                                                  *c.tightening.r_ratio);
    return lv;
}

std::vector<std::string> numbered(const std::string& stem, Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index i = 1; i <= n; ++i) out.push_back(stem + std::to_string(i));
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void write_stats_csv(const std::filesystem::path& path, const Provenance& prov,
                     const std::string& name, const SweepResult& r) {
    CsvWriter csv(prov, name, {"rho", "gamma", "g_avg", "g_max", "xi"});
    for (const auto& s : r.stats) csv.row({s.rho, s.gamma, s.g_avg, s.g_max, s.xi});
    csv.save(path);
}

void write_g_csv(const std::filesystem::path& path, const Provenance& prov,
                 const std::string& name, const SweepResult& r) {
    CsvWriter csv(prov, name, concat({"scenario"}, numbered("g_", r.g.cols())));
    for (Eigen::Index i = 0; i < r.g.rows(); ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (Eigen::Index j = 0; j < r.g.cols(); ++j) row.push_back(r.g(i, j));
        csv.row(row);
    }
    csv.save(path);
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
    const Eigen::Index j = t.column(name);
    std::vector<double> out(static_cast<std::size_t>(t.values.rows()));
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) out[static_cast<std::size_t>(i)] = t.values(i, j);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void run_tighten(const ExperimentConfig& c, const PipelineOptions& o) {
    const LtiSystem sys = c.system();
    const ControllerDesign design = design_of(c, sys);
    const ProbabilisticLevels levels = tightening_levels(c, sys);
    DisturbanceModel model = c.disturbance;
    model.seed = c.tightening.seed;
    say(o, "tighten: r = " + std::to_string(levels.r) + ", S = " +
               std::to_string(sample_complexity(levels)) + " error trajectories");
    const TighteningProfile profile = compute_tightening(sys, design, model, levels, o.threads);
    say(o, "tighten: validating with " + std::to_string(c.tightening.validation_samples) +
               " fresh trajectories");
    const TighteningValidation val = validate_tightening(
        profile, design, model, c.tightening.validation_samples, c.tightening.validation_seed,
        o.threads);
    if (!val.passed())
        say(o, "tighten: warning: " + std::to_string(val.flagged.size()) +
                   " (step, row) cells exceed the validation threshold");

    const Provenance prov = provenance(c);
    json doc = header(c, artifact::kTightening);
    doc["design"] = {{"K", matrix_json(design.K())},
                     {"P", matrix_json(design.P())},
                     {"A_K", matrix_json(design.A_K())},
                     {"spectral_radius_A_K", spectral_radius(design.A_K())},
                     {"riccati_residual",
                      riccati_residual(design.A_K(), design.Q(), design.R(), design.K(), design.P())}};
    doc["profile"] = to_json(profile);
    json flagged = json::array();
    for (const auto& [l, j] : val.flagged) flagged.push_back({l, j});
    doc["validation"] = {{"sample_count", val.sample_count},
                         {"seed", c.tightening.validation_seed},
                         {"threshold", val.threshold},
                         {"max_frequency", val.frequency.maxCoeff()},
                         {"flagged", flagged},
                         {"passed", val.passed()}};
    write_json(o.out / artifact::kTightening, doc);

    CsvWriter q(prov, "tightening_q", concat({"step"}, numbered("q_", profile.q.cols())));
    CsvWriter f(prov, "tightening_validation", concat({"step"}, numbered("freq_", val.frequency.cols())));
    for (Eigen::Index l = 0; l < profile.q.rows(); ++l) {
        std::vector<double> qr{static_cast<double>(l)}, fr{static_cast<double>(l)};
        for (Eigen::Index j = 0; j < profile.q.cols(); ++j) {
            qr.push_back(profile.q(l, j));
            fr.push_back(val.frequency(l, j));
        }
        q.row(qr);
        f.row(fr);
    }
    q.save(o.out / artifact::kTighteningQ);
    f.save(o.out / artifact::kValidation);
}

void run_sweep(const ExperimentConfig& c, const PipelineOptions& o) {
    const std::filesystem::path tpath = o.out / artifact::kTightening;
    const json tdoc = read_json(tpath);
    check_provenance(tdoc, c, tpath);
    const TighteningProfile profile = profile_from_json(tdoc.at("profile"));

    const LtiSystem sys = c.system();
    const ControllerDesign design = design_of(c, sys);
    const std::vector<double> grid = c.grid();
    const PenaltyController controller(sys, design, profile, grid.front(), c.input_set,
                                       c.sweep.slack_mode);

    ProbabilisticLevels levels{c.sweep.epsilon, c.sweep.delta, c.sweep.r,
                               static_cast<std::int64_t>(grid.size())};
    const std::int64_t formula = sample_complexity(levels);
    const std::int64_t S = std::max(formula, c.sweep.sample_count.value_or(0));

    DisturbanceModel model = c.disturbance;
    model.seed = c.sweep.seed;
    say(o, "sweep: drawing " + std::to_string(S) + " scenarios (formula " +
               std::to_string(formula) + ")");
    const FeasibilityOracle oracle = [&](const Vector& x) {
        QpSolver solver;
        return in_feasible_region(x, sys, design, profile, solver);
    };
    const ScenarioBatch batch =
        generate_scenario_batch(oracle, c.initial_state_box, model, static_cast<std::size_t>(S),
                                c.sweep.M, c.sweep.seed, o.threads);

    SweepSetup setup;
    setup.grid = grid;
    setup.levels = levels;
    setup.simulation = {c.sweep.g_sum, c.sample_time};
    setup.threads = o.threads;
    say(o, "sweep: " + std::to_string(grid.size()) + " rho values x " + std::to_string(S) +
               " scenarios");
    const SweepResult result = sweep(controller, batch, setup);

    std::optional<SweepResult> detail;
    if (!c.sweep.detail_rhos.empty()) {
        SweepSetup ds = setup;
        ds.grid = c.sweep.detail_rhos;
        ds.trace_rhos = c.sweep.detail_rhos;
        say(o, "sweep: detail rho values on the same batch");
        detail = sweep(controller, batch, ds);
    }

    const Provenance prov = provenance(c);
    json doc = header(c, artifact::kSweep);
    doc["levels"] = levels_json(result.levels);
    doc["sample_count"] = result.sample_count;
    doc["sample_count_formula"] = formula;
    doc["batch_seed"] = result.batch_seed;
    doc["batch_hash"] = result.batch_hash;
    doc["profile_hash"] = profile.hash();
    doc["slack_mode"] = to_string(result.slack_mode);
    doc["g_sum"] = to_string(result.g_sum);
    doc["M"] = c.sweep.M;
    doc["sample_time"] = c.sample_time;
    doc["rho_min"] = c.sweep.rho_min;
    doc["rho_max"] = c.sweep.rho_max;
    doc["stats"] = stats_json(result);
    if (detail) {
        doc["detail"] = {{"levels", levels_json(detail->levels)}, {"stats", stats_json(*detail)}};
    }
    write_json(o.out / artifact::kSweep, doc);

    write_stats_csv(o.out / artifact::kSweepStats, prov, "sweep_stats", result);
    write_g_csv(o.out / artifact::kSweepG, prov, "sweep_g", result);

    const Eigen::Index nx = sys.nx(), nu = sys.nu();
    CsvWriter scen(prov, "scenarios", concat({"scenario"}, numbered("x0_", nx)));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<double> row{static_cast<double>(i)};
        for (Eigen::Index k = 0; k < nx; ++k) row.push_back(batch.scenarios[i].x0(k));
        scen.row(row);
    }
    scen.save(o.out / artifact::kScenarios);

    if (detail) {
        write_stats_csv(o.out / artifact::kDetailStats, prov, "detail_stats", *detail);
        write_g_csv(o.out / artifact::kDetailG, prov, "detail_g", *detail);
        CsvWriter term(prov, "terminal_states", concat({"rho", "scenario"}, numbered("x_", nx)));
        for (std::size_t j = 0; j < detail->stats.size(); ++j) {
            const Matrix& T = detail->terminal[j];
            for (Eigen::Index i = 0; i < T.cols(); ++i) {
                std::vector<double> row{detail->stats[j].rho, static_cast<double>(i)};
                for (Eigen::Index k = 0; k < nx; ++k) row.push_back(T(k, i));
                term.row(row);
            }
        }
        term.save(o.out / artifact::kTerminal);

        CsvWriter tr(prov, "traces",
                     concat(concat({"rho", "scenario", "k"}, numbered("x_", nx)),
                            concat(numbered("u_", nu), {"stage_cost", "violation"})));
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& t : detail->traces) {
            if (t.scenario_index >= c.sweep.trace_limit) continue;
            for (Eigen::Index k = 0; k < t.states.cols(); ++k) {
                std::vector<double> row{t.rho, static_cast<double>(t.scenario_index), static_cast<double>(k)};
                for (Eigen::Index a = 0; a < nx; ++a) row.push_back(t.states(a, k));
                for (Eigen::Index a = 0; a < nu; ++a) {
                    if (k < t.inputs.cols())
                        row.push_back(t.inputs(a, k));
                    else
                        row.push_back(t.final_input.size() ? t.final_input(a) : nan);
                }
                row.push_back(k < t.stage_costs.size() ? t.stage_costs(k) : nan);
                row.push_back(k < t.violations.size() ? t.violations(k) : nan);
                tr.row(row);
            }
        }
        tr.save(o.out / artifact::kTraces);
    }
}

void run_select(const ExperimentConfig& c, const PipelineOptions& o) {
    const std::filesystem::path path = o.out / artifact::kSweep;
    const json doc = read_json(path);
    check_provenance(doc, c, path);
    SweepResult stored;
    try {
        for (const auto& s : doc.at("stats"))
            stored.stats.push_back({s.at("rho").get<double>(), s.at("gamma").get<double>(),
                                    s.at("g_avg").get<double>(), s.at("g_max").get<double>(),
                                    s.at("xi").get<double>()});
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": malformed sweep statistics: " + e.what());
    }
    SelectionRule rule = c.selection;
    if (o.threshold) rule = {SelectionPolicy::SmallestRhoBelow, *o.threshold};
    const SelectedRho best = select_rho(stored, {SelectionPolicy::MinGamma, 0.0});
    const SelectedRho chosen = select_rho(stored, rule);
    say(o, "select: rho = " + format_double(chosen.rho) + " (gamma " + format_double(chosen.gamma) + ")");

    json out = header(c, artifact::kSelection);
    out["policy"] = to_string(rule.policy);
    if (rule.policy == SelectionPolicy::SmallestRhoBelow) out["threshold"] = rule.threshold;
    out["rho"] = chosen.rho;
    out["index"] = chosen.index;
    out["gamma"] = chosen.gamma;
    out["min_gamma"] = {{"rho", best.rho}, {"index", best.index}, {"gamma", best.gamma}};
    write_json(o.out / artifact::kSelection, out);
}

void run_report(const ExperimentConfig& c, const PipelineOptions& o) {
    const Provenance prov = provenance(c);
    auto comment = [&](const std::string& data) {
        return prov.comment_lines("") + "data: " + data + "\n";
    };

    const std::filesystem::path stats_path = o.out / artifact::kSweepStats;
    const CsvTable stats = read_csv(stats_path);
    check_provenance(stats, c, stats_path);
    {
        PlotPanel p;
        p.title = "Violation index versus penalty factor";
        p.x_label = "rho";
        p.y_label = "g";
        p.log_x = true;
        const std::vector<double> rho = column(stats, "rho");
        const char* names[] = {"gamma", "g_avg", "g_max"};
        bool positive = true;
        for (const char* n : names)
            for (double v : column(stats, n)) positive = positive && v > 0.0;
        p.log_y = positive;
        for (std::size_t i = 0; i < 3; ++i)
            p.series.push_back({names[i], rho, column(stats, names[i]), palette(i), PlotSeries::Style::Line});
        const std::filesystem::path sel = o.out / artifact::kSelection;
        if (std::filesystem::exists(sel)) {
            const json s = read_json(sel);
            if (s.value("config_hash", std::string()) == c.hash()) p.marker_x = s.at("rho").get<double>();
        }
        if (c.write_svg)
            write_file(o.out / artifact::kFig1,
                       render_svg({p}, "Sweep statistics", comment(artifact::kSweepStats)));
    }

    const std::filesystem::path detail_path = o.out / artifact::kDetailStats;
    if (!std::filesystem::exists(detail_path)) {
        say(o, "report: no detail rho values; trajectory, scatter and hull figures skipped");
        return;
    }
    const CsvTable detail = read_csv(detail_path);
    check_provenance(detail, c, detail_path);
    const std::vector<double> rhos = column(detail, "rho");
    auto rho_title = [](double rho) { return "rho = " + format_double(rho).substr(0, 10); };

    const CsvTable g = read_csv(o.out / artifact::kDetailG);
    check_provenance(g, c, o.out / artifact::kDetailG);
    {
        std::vector<PlotPanel> panels;
        const std::vector<double> scenario = column(g, "scenario");
        for (std::size_t j = 0; j < rhos.size(); ++j) {
            PlotPanel p;
            p.title = rho_title(rhos[j]);
            p.x_label = "scenario";
            p.y_label = "g(w, rho)";
            PlotSeries s{"", scenario, column(g, "g_" + std::to_string(j + 1)), palette(j),
                         PlotSeries::Style::Markers, 1.5};
            p.series.push_back(std::move(s));
            panels.push_back(std::move(p));
        }
        if (c.write_svg)
            write_file(o.out / artifact::kFig3,
                       render_svg(panels, "Per-scenario violation index", comment(artifact::kDetailG)));
    }

    if (c.A.rows() != 2) {
        say(o, "report: trajectory and hull figures need a planar state; skipped");
        return;
    }
    const std::array<double, 4> frame{c.initial_state_box.lower(0), c.initial_state_box.upper(0),
                                      c.initial_state_box.lower(1), c.initial_state_box.upper(1)};

    const CsvTable traces = read_csv(o.out / artifact::kTraces);
    check_provenance(traces, c, o.out / artifact::kTraces);
    {
        const Eigen::Index jr = traces.column("rho"), js = traces.column("scenario");
        const Eigen::Index j1 = traces.column("x_1"), j2 = traces.column("x_2");
        std::vector<PlotPanel> panels;
        for (std::size_t r = 0; r < rhos.size(); ++r) {
            PlotPanel p;
            p.title = rho_title(rhos[r]);
            p.x_label = "x1";
            p.y_label = "x2";
            p.frame = frame;
            PlotSeries starts{"x0", {}, {}, "#d62728", PlotSeries::Style::Markers, 2.5};
            PlotSeries ends{"xM", {}, {}, "#2ca02c", PlotSeries::Style::Markers, 2.5};
            PlotSeries line{"", {}, {}, "#1f77b4", PlotSeries::Style::Line};
            double current = -1.0;
            auto flush = [&] {
                if (line.x.empty()) return;
                starts.x.push_back(line.x.front());
                starts.y.push_back(line.y.front());
                ends.x.push_back(line.x.back());
                ends.y.push_back(line.y.back());
                p.series.push_back(line);
                line.x.clear();
                line.y.clear();
            };
            for (Eigen::Index i = 0; i < traces.values.rows(); ++i) {
                if (traces.values(i, jr) != rhos[r]) continue;
                if (traces.values(i, js) != current) {
                    flush();
                    current = traces.values(i, js);
                }
                line.x.push_back(traces.values(i, j1));
                line.y.push_back(traces.values(i, j2));
            }
            flush();
            p.series.push_back(starts);
            p.series.push_back(ends);
            panels.push_back(std::move(p));
        }
        if (c.write_svg)
            write_file(o.out / artifact::kFig2,
                       render_svg(panels, "Closed-loop state trajectories", comment(artifact::kTraces)));
    }

    const CsvTable term = read_csv(o.out / artifact::kTerminal);
    check_provenance(term, c, o.out / artifact::kTerminal);
    {
        const Eigen::Index jr = term.column("rho");
        const Eigen::Index j1 = term.column("x_1"), j2 = term.column("x_2");
        CsvWriter hulls(prov, "fig4_hulls", {"rho", "vertex", "x_1", "x_2", "area"});
        PlotPanel p;
        p.title = "Convex hull of x_M";
        p.x_label = "x1";
        p.y_label = "x2";
        for (std::size_t r = 0; r < rhos.size(); ++r) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < term.values.rows(); ++i)
                if (term.values(i, jr) == rhos[r]) rows.push_back(i);
            Matrix pts(2, static_cast<Eigen::Index>(rows.size()));
            for (std::size_t k = 0; k < rows.size(); ++k) {
                pts(0, static_cast<Eigen::Index>(k)) = term.values(rows[k], j1);
                pts(1, static_cast<Eigen::Index>(k)) = term.values(rows[k], j2);
            }
            const Matrix hull = terminal_hull(pts);
            const double area = hull.cols() >= 3 ? polygon_area(hull) : 0.0;
            PlotSeries s{rho_title(rhos[r]), {}, {}, palette(r), PlotSeries::Style::Polygon};
            for (Eigen::Index v = 0; v < hull.cols(); ++v) {
                hulls.row({rhos[r], static_cast<double>(v), hull(0, v), hull(1, v), area});
                s.x.push_back(hull(0, v));
                s.y.push_back(hull(1, v));
            }
            p.series.push_back(std::move(s));
        }
        hulls.save(o.out / artifact::kHulls);
        if (c.write_svg)
            write_file(o.out / artifact::kFig4,
                       render_svg({p}, "Terminal state hulls", comment(artifact::kHulls)));
    }
}

// ---------------------------------------------------------------------------

void run_stage(const std::string& stage, const ExperimentConfig& c, const PipelineOptions& o) {
    if (stage == "run") {
        for (const char* s : {"tighten", "sweep", "select", "report"}) run_stage(s, c, o);
        return;
    }
    void (*fn)(const ExperimentConfig&, const PipelineOptions&) = nullptr;
    if (stage == "tighten")
        fn = run_tighten;
    else if (stage == "sweep")
        fn = run_sweep;
    else if (stage == "select")
        fn = run_select;
    else if (stage == "report")
        fn = run_report;
    else
        throw ConfigError("unknown stage '" + stage + "'");

    std::filesystem::create_directories(o.out);
    const std::filesystem::path mpath = o.out / artifact::kManifest;
    json manifest;
    if (std::filesystem::exists(mpath)) {
        try {
            manifest = read_json(mpath);
        } catch (const Error&) {
            manifest = json();
        }
    }
    if (!manifest.is_object() || manifest.value("config_hash", std::string()) != c.hash()) {
        manifest = header(c, artifact::kManifest);
        manifest["config_source"] = c.source;
        manifest["stages"] = json::array();
    }
    json record = {{"stage", stage}, {"started_at", timestamp()}};
    auto save = [&](const std::string& status, const std::string& message) {
        record["finished_at"] = timestamp();
        record["status"] = status;
        if (!message.empty()) record["message"] = message;
        manifest["stages"].push_back(record);
        manifest["status"] = status;
        if (status == "failed")
            manifest["failed_stage"] = stage;
        else
            manifest.erase("failed_stage");
        write_json(mpath, manifest);
    };
    say(o, stage + ": started");
    try {
        fn(c, o);
    } catch (const std::exception& e) {
        save("failed", e.what());
        throw;
    }
    save("ok", "");
}

}  // namespace smpcval
