// kedfl - body-induced link attenuation prediction tool.
//
// Subcommands: predict, sweep, stats, calibrate, oracle. One scenario
// document drives every command; stats and sweep are sections within it.
// Exit codes: 0 ok, 2 input error, 3 validation error, 4 divergence,
// 5 capability exceeded.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kedfl/kedfl.hpp"
#include "kedfl/scenario_io.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_input = 2;
constexpr int exit_validation = 3;
constexpr int exit_divergence = 4;
constexpr int exit_capability = 5;

// Locale-independent, 6 significant digits.
std::string fmt6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct EngineSelection {
    bool mbm = false;
    bool pmbm = false;
    bool additive = false;
};

EngineSelection parse_engines(const std::string& name)
{
    EngineSelection sel;
    if (name == "all")
        sel.mbm = sel.pmbm = sel.additive = true;
    else if (name == "mbm")
        sel.mbm = true;
    else if (name == "pmbm")
        sel.pmbm = true;
    else if (name == "additive")
        sel.additive = true;
    else
        throw kedfl::schema_error("unknown engine \"" + name + "\" (mbm|pmbm|additive|all)");
    return sel;
}

std::vector<kedfl::KnifeEdge> active_edges(const kedfl::ScenarioGeometry& geom,
                                           const std::vector<kedfl::Body>& bodies)
{
    std::vector<kedfl::Body> active;
    for (const kedfl::Body& b : bodies)
        if (kedfl::in_link_span(geom, b.x))
            active.push_back(b);
    std::sort(active.begin(), active.end(),
              [](const kedfl::Body& a, const kedfl::Body& b) { return a.x < b.x; });
    std::vector<kedfl::KnifeEdge> edges;
    edges.reserve(active.size());
    for (const kedfl::Body& b : active)
        edges.push_back(kedfl::make_edge(geom, b));
    return edges;
}

int report_validation(const kedfl::ValidationReport& report)
{
    for (const kedfl::Finding& f : report.findings) {
        const char* level = f.severity == kedfl::Severity::error     ? "error"
                            : f.severity == kedfl::Severity::warning ? "warning"
                                                                     : "info";
        std::cerr << level << ": " << f.message;
        if (f.body_index >= 0)
            std::cerr << " (body " << f.body_index + 1 << ")";
        std::cerr << "\n";
    }
    return report.has_errors() ? exit_validation : exit_ok;
}

int cmd_predict(const kedfl::Scenario& sc, const EngineSelection& sel, int /*threads*/)
{
    const auto report = kedfl::validate(sc.geometry, sc.bodies);
    if (report_validation(report) != exit_ok)
        return exit_validation;

    const auto edges = active_edges(sc.geometry, sc.bodies);
    const kedfl::QuadratureSpec spec;

    if (sel.mbm) {
        const auto ratio = kedfl::field_ratio_multi(sc.geometry, edges, spec);
        std::cout << "engine=mbm A_db=" << fmt6(kedfl::attenuation_db(ratio))
                  << " re=" << fmt6(ratio.value.real()) << " im=" << fmt6(ratio.value.imag())
                  << " err=" << fmt6(ratio.err_estimate) << "\n";
    }
    if (sel.pmbm) {
        const auto ratio = kedfl::field_ratio_multi_paraxial(sc.geometry, edges, spec);
        std::cout << "engine=pmbm A_db=" << fmt6(kedfl::attenuation_db(ratio))
                  << " re=" << fmt6(ratio.value.real()) << " im=" << fmt6(ratio.value.imag())
                  << " err=" << fmt6(ratio.err_estimate) << "\n";
    }
    if (sel.additive) {
        const double a = kedfl::additive_attenuation(sc.geometry, sc.bodies, kedfl::Engine::mbm, spec);
        std::cout << "engine=additive A_db=" << fmt6(a) << "\n";
    }
    if (sel.mbm && edges.size() >= 2) {
        const auto psi = kedfl::psi_subset(sc.geometry, edges, spec);
        std::cout << "mixed_abs=" << fmt6(std::abs(psi.value)) << "\n";
    }
    return exit_ok;
}

int cmd_sweep(const kedfl::Scenario& sc, const EngineSelection& sel, const std::string& out_path,
              int threads)
{
    if (!sc.sweep)
        throw kedfl::schema_error("sweep command requires a \"sweep\" section in the scenario");
    const auto report = kedfl::validate(sc.geometry, sc.bodies);
    // The moving body changes position per row; only report, do not reject,
    // unless fixed bodies are already degenerate.
    const kedfl::SweepSpec& sw = *sc.sweep;
    const kedfl::QuadratureSpec spec;

    const std::size_t rows =
        static_cast<std::size_t>(std::floor((sw.stop - sw.start) / sw.step + 1e-9)) + 1;
    std::vector<std::string> lines(rows);
    std::vector<std::string> warnings(rows);

    kedfl::run_indexed(rows, threads, [&](std::size_t i) {
        const double pos = sw.start + static_cast<double>(i) * sw.step;
        std::vector<kedfl::Body> bodies = sc.bodies;
        kedfl::Body& mover = bodies[static_cast<std::size_t>(sw.body_index - 1)];
        if (sw.axis == kedfl::SweepSpec::Axis::along)
            mover.x = pos;
        else
            mover.y = pos;

        std::string line = fmt6(pos);
        bool reachable = true;
        if (sw.axis == kedfl::SweepSpec::Axis::along && !kedfl::in_link_span(sc.geometry, pos))
            reachable = false;
        if (reachable) {
            const auto row_report = kedfl::validate(sc.geometry, bodies);
            if (row_report.has_errors())
                reachable = false;
        }
        if (!reachable) {
            lines[i] = line + ",,,,,";
            warnings[i] = "position " + fmt6(pos) + " skipped (unreachable or degenerate)";
            return;
        }

        // A row whose engine cannot converge (for example the paraxial chain
        // with a body at the antenna) degrades to a warning row instead of
        // aborting the sweep.
        const auto edges = active_edges(sc.geometry, bodies);
        std::string a_mbm, a_pmbm, a_add, err_mbm, err_pmbm;
        try {
            if (sel.mbm) {
                const auto r = kedfl::field_ratio_multi(sc.geometry, edges, spec);
                a_mbm = fmt6(kedfl::attenuation_db(r));
                err_mbm = fmt6(r.err_estimate);
            }
            if (sel.pmbm) {
                const auto r = kedfl::field_ratio_multi_paraxial(sc.geometry, edges, spec);
                a_pmbm = fmt6(kedfl::attenuation_db(r));
                err_pmbm = fmt6(r.err_estimate);
            }
            if (sel.additive)
                a_add = fmt6(
                    kedfl::additive_attenuation(sc.geometry, bodies, kedfl::Engine::mbm, spec));
        } catch (const kedfl::error& e) {
            lines[i] = line + ",,,,,";
            warnings[i] = "position " + fmt6(pos) + " skipped (" + e.what() + ")";
            return;
        }
        lines[i] = line + "," + a_mbm + "," + a_pmbm + "," + a_add + "," + err_mbm + "," + err_pmbm;
    });

    std::ofstream out(out_path);
    if (!out)
        throw kedfl::schema_error("cannot open output file: " + out_path);
    out << "position_m,A_mbm_db,A_pmbm_db,A_additive_db,err_mbm,err_pmbm\n";
    for (const std::string& line : lines)
        out << line << "\n";
    for (const std::string& w : warnings)
        if (!w.empty())
            std::cerr << "warning: " << w << "\n";
    (void)report;
    return exit_ok;
}

int cmd_stats(const kedfl::Scenario& sc, const std::string& engine_name, int threads)
{
    if (!sc.stats)
        throw kedfl::schema_error("stats command requires a \"stats\" section in the scenario");
    kedfl::Engine engine;
    if (engine_name == "mbm" || engine_name == "all")
        engine = kedfl::Engine::mbm;
    else if (engine_name == "pmbm")
        engine = kedfl::Engine::pmbm;
    else
        throw kedfl::schema_error("stats: engine must be mbm or pmbm");

    const auto report = kedfl::validate(sc.geometry, sc.bodies);
    if (report_validation(report) != exit_ok)
        return exit_validation;

    const kedfl::StatParams& params = *sc.stats;
    const auto [mu0, sigma0_sq] = kedfl::rss_empty(params);
    std::cout << "mu0_dbm=" << fmt6(mu0) << " sigma0_sq=" << fmt6(sigma0_sq) << "\n";

    if (!kedfl::any_body_in_region(sc.geometry, sc.bodies)) {
        std::cout << "mu1_dbm=" << fmt6(mu0) << " sigma1_sq=" << fmt6(sigma0_sq)
                  << " delta_mu=0 delta_sigma_sq=0 mc_stderr=0 seed=" << params.seed << "\n";
        return exit_ok;
    }
    const auto stats =
        kedfl::attenuation_stats(sc.geometry, sc.bodies, params, engine, {}, threads);
    std::cout << "mu1_dbm=" << fmt6(stats.mu1) << " sigma1_sq=" << fmt6(stats.sigma1_sq)
              << " delta_mu=" << fmt6(stats.delta_mu)
              << " delta_sigma_sq=" << fmt6(stats.delta_sigma_sq)
              << " mc_stderr=" << fmt6(stats.mc_stderr) << " seed=" << params.seed << "\n";
    return exit_ok;
}

int cmd_calibrate(const kedfl::Scenario& sc, const std::string& measurements_path,
                  const std::string& out_path, const std::string& engine_name, int threads)
{
    kedfl::Engine engine;
    if (engine_name == "mbm" || engine_name == "all")
        engine = kedfl::Engine::mbm;
    else if (engine_name == "pmbm")
        engine = kedfl::Engine::pmbm;
    else
        throw kedfl::schema_error("calibrate: engine must be mbm or pmbm");
    if (sc.bodies.empty())
        throw kedfl::schema_error("calibrate: scenario must define the bodies to fit");

    const kedfl::MeasurementSet meas = kedfl::load_measurements_file(measurements_path);

    std::vector<double> init_w, init_h;
    for (const kedfl::Body& b : sc.bodies) {
        init_w.push_back(kedfl::effective_width(b));
        init_h.push_back(b.h);
    }
    const double delta_mu_c = sc.stats ? sc.stats->delta_mu_C : 0.0;

    const kedfl::CalibrationResult result =
        kedfl::calibrate(sc.geometry, meas, init_w, init_h, engine, {}, {}, delta_mu_c, threads);

    nlohmann::json jout;
    jout["converged"] = result.converged;
    jout["iterations"] = result.iterations;
    jout["residual_ss_db2"] = result.residual_ss;
    jout["bodies"] = nlohmann::json::array();
    for (std::size_t n = 0; n < result.widths.size(); ++n)
        jout["bodies"].push_back({{"c_m", result.widths[n]}, {"h_m", result.heights[n]}});
    std::ofstream out(out_path);
    if (!out)
        throw kedfl::schema_error("cannot open output file: " + out_path);
    out << jout.dump(2) << "\n";

    for (std::size_t n = 0; n < result.widths.size(); ++n)
        std::cout << "body" << n + 1 << " c_m=" << fmt6(result.widths[n])
                  << " h_m=" << fmt6(result.heights[n]) << "\n";
    std::cout << "residual_ss_db2=" << fmt6(result.residual_ss)
              << " iterations=" << result.iterations
              << " converged=" << (result.converged ? "true" : "false") << "\n";
    return result.converged ? exit_ok : exit_divergence;
}

int cmd_oracle(const kedfl::Scenario& sc, std::optional<double> grid_step, int threads)
{
    const auto report = kedfl::validate(sc.geometry, sc.bodies);
    if (report_validation(report) != exit_ok)
        return exit_validation;

    const auto edges = active_edges(sc.geometry, sc.bodies);
    if (edges.size() > 2)
        throw kedfl::capability_error("oracle: at most two bodies are supported");
    const double step = grid_step.value_or(sc.geometry.lambda / 8.0);

    const auto oracle = kedfl::oracle_field_ratio(sc.geometry, edges, step, threads);
    const auto engine = kedfl::field_ratio_multi(sc.geometry, edges);
    const double a_oracle = kedfl::attenuation_db(oracle);
    const double a_engine = kedfl::attenuation_db(engine);
    std::cout << "A_oracle_db=" << fmt6(a_oracle) << " A_engine_db=" << fmt6(a_engine)
              << " diff_db=" << fmt6(a_engine - a_oracle)
              << " oracle_err=" << fmt6(oracle.err_estimate) << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"kedfl - multi-body knife-edge attenuation and RSS prediction"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_path;
    std::string engine_name = "all";
    std::string measurements_path;
    int threads = 0;
    std::optional<double> grid_step;

    auto* predict = app.add_subcommand("predict", "extra attenuation for one configuration");
    predict->add_option("--scenario", scenario_path, "scenario JSON")->required();
    predict->add_option("--engine", engine_name, "mbm|pmbm|additive|all");
    predict->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* sweep = app.add_subcommand("sweep", "position sweep to CSV");
    sweep->add_option("--scenario", scenario_path, "scenario JSON")->required();
    sweep->add_option("--out", out_path, "output CSV path")->required();
    sweep->add_option("--engine", engine_name, "mbm|pmbm|additive|all");
    sweep->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* stats = app.add_subcommand("stats", "RSS mean/variance prediction");
    stats->add_option("--scenario", scenario_path, "scenario JSON")->required();
    stats->add_option("--engine", engine_name, "mbm|pmbm");
    stats->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* calibrate = app.add_subcommand("calibrate", "fit EM-equivalent sizes to landmarks");
    calibrate->add_option("--scenario", scenario_path, "scenario JSON")->required();
    calibrate->add_option("--measurements", measurements_path, "landmark JSON")->required();
    calibrate->add_option("--out", out_path, "result JSON path");
    calibrate->add_option("--engine", engine_name, "mbm|pmbm");
    calibrate->add_option("--threads", threads, "worker threads (0 = auto)");

    auto* oracle = app.add_subcommand("oracle", "brute-force check against the engine");
    oracle->add_option("--scenario", scenario_path, "scenario JSON")->required();
    oracle->add_option("--grid-step", grid_step, "oracle grid step, m (default lambda/8)");
    oracle->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI11_PARSE(app, argc, argv);

    try {
        const int n_threads = kedfl::resolve_thread_count(threads);
        const kedfl::Scenario sc = kedfl::load_scenario_file(scenario_path);
        if (predict->parsed())
            return cmd_predict(sc, parse_engines(engine_name), n_threads);
        if (sweep->parsed())
            return cmd_sweep(sc, parse_engines(engine_name), out_path, n_threads);
        if (stats->parsed())
            return cmd_stats(sc, engine_name, n_threads);
        if (calibrate->parsed()) {
            const std::string out = out_path.empty() ? "calibration_result.json" : out_path;
            return cmd_calibrate(sc, measurements_path, out, engine_name, n_threads);
        }
        if (oracle->parsed())
            return cmd_oracle(sc, grid_step, n_threads);
    } catch (const kedfl::schema_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return exit_input;
    } catch (const kedfl::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const kedfl::convergence_error& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return exit_divergence;
    } catch (const kedfl::capability_error& e) {
        std::cerr << "capability exceeded: " << e.what() << "\n";
        return exit_capability;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_ok;
}
