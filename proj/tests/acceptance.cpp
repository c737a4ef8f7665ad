// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criteria with a runtime budget are timed and fail when
// they exceed it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "kedfl/kedfl.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const kedfl::ScenarioGeometry hall_link{5.0, 0.9, kedfl::speed_of_light_m_s / 2.486e9};

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail)
{
    std::printf("[%s] %02d %s (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass)
        ++failures;
}

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

kedfl::KnifeEdge hall_edge(double x, double y = 0.0, double c = 0.55, double h = 1.8)
{
    return {x, y, c, -hall_link.H, h - hall_link.H};
}

// ---- independent Fresnel reference (adaptive Simpson of the definition) ----

double simpson_rec(const std::function<double(double)>& f, double a, double m, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth)
{
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol)
{
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, 40);
}

kedfl::FresnelPair fresnel_reference(double t)
{
    if (t == 0.0)
        return {0.0, 0.0};
    const double sign = t < 0.0 ? -1.0 : 1.0;
    const double at = std::abs(t);
    double c = 0.0, s = 0.0, lo = 0.0;
    while (lo < at) {
        const double hi = std::min(lo + 1.0, at);
        c += integrate([](double u) { return std::cos(0.5 * std::numbers::pi * u * u); }, lo, hi,
                       1e-13);
        s += integrate([](double u) { return std::sin(0.5 * std::numbers::pi * u * u); }, lo, hi,
                       1e-13);
        lo = hi;
    }
    return {sign * c, sign * s};
}

// ---- criteria ----

void criterion_1()
{
    const auto start = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double t = -10.0 + 20.0 * static_cast<double>(i) / 199.0;
        const auto got = kedfl::fresnel(t);
        const auto ref = fresnel_reference(t);
        worst = std::max({worst, std::abs(got.C - ref.C), std::abs(got.S - ref.S)});
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "max abs error %.2e vs 1e-9, %.2f s vs 1 s", worst,
                  elapsed);
    report(1, "Fresnel accuracy against the defining integrals", worst <= 1e-9 && elapsed < 1.0,
           detail);
}

void criterion_2()
{
    const double inf = std::numeric_limits<double>::infinity();
    const kedfl::KnifeEdge graze{2.5, 0.0, inf, -inf, 0.0};
    const double a_graze =
        kedfl::attenuation_db(kedfl::field_ratio_single_paraxial(hall_link, graze));
    const kedfl::KnifeEdge plane{2.5, 0.0, inf, -inf, inf};
    const double blocked = std::abs(kedfl::field_ratio_single_paraxial(hall_link, plane).value);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "grazing %.5f dB vs 6.0206+-0.001, full plane |E/E0| %.1e",
                  a_graze, blocked);
    report(2, "classic knife-edge limits", std::abs(a_graze - 6.0206) <= 0.001 && blocked < 1e-6,
           detail);
}

void criterion_3()
{
    const kedfl::KnifeEdge edge = hall_edge(2.5);
    const auto single = kedfl::field_ratio_single(hall_link, edge);
    const auto multi =
        kedfl::field_ratio_multi(hall_link, std::span<const kedfl::KnifeEdge>(&edge, 1));
    const double full_rel = std::abs(multi.value - single.value) / std::abs(single.value);

    const auto psingle = kedfl::field_ratio_single_paraxial(hall_link, edge);
    const auto pmulti =
        kedfl::field_ratio_multi_paraxial(hall_link, std::span<const kedfl::KnifeEdge>(&edge, 1));
    const double par_rel = std::abs(pmulti.value - psingle.value) /
                           std::max(std::abs(psingle.value), 1e-300);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "full %.1e vs 1e-6, paraxial %.1e vs 1e-9", full_rel,
                  par_rel);
    report(3, "multi-body engines reduce to the single-body engines at N=1",
           full_rel <= 1e-6 && par_rel <= 1e-9, detail);
}

void criterion_4(int threads)
{
    const auto start = Clock::now();
    const kedfl::KnifeEdge edge = hall_edge(2.5);
    const auto engine = kedfl::field_ratio_single(hall_link, edge);
    const auto oracle = kedfl::oracle_field_ratio(
        hall_link, std::span<const kedfl::KnifeEdge>(&edge, 1), hall_link.lambda / 8.0, threads);
    const double diff =
        std::abs(kedfl::attenuation_db(engine) - kedfl::attenuation_db(oracle));
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "|dA| %.4f dB vs 0.1 dB, %.1f s vs 30 s", diff, elapsed);
    report(4, "single-body oracle equivalence", diff <= 0.1 && elapsed < 30.0, detail);
}

void criterion_5(int threads)
{
    // lambda/16 keeps the midpoint oracle's own discretization error well
    // below the 0.2 dB budget in the deep-shadow placements.
    const auto start = Clock::now();
    const kedfl::KnifeEdge first = hall_edge(1.0);
    const double placements[10] = {1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.25, 4.5, 4.75};
    double worst = 0.0;
    bool pass = true;
    for (double x2 : placements) {
        const kedfl::KnifeEdge pair[2] = {first, hall_edge(x2)};
        const auto engine = kedfl::field_ratio_multi(hall_link, pair);
        const auto oracle =
            kedfl::oracle_field_ratio(hall_link, pair, hall_link.lambda / 16.0, threads);
        const double diff =
            std::abs(kedfl::attenuation_db(engine) - kedfl::attenuation_db(oracle));
        worst = std::max(worst, diff);
        pass = pass && diff <= 0.2;
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "worst |dA| %.4f dB vs 0.2 dB, %.0f s vs 300 s", worst,
                  elapsed);
    report(5, "dual-body oracle equivalence over ten placements", pass && elapsed < 300.0, detail);
}

void criterion_6()
{
    const kedfl::KnifeEdge first = hall_edge(1.0);
    double worst = 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double y2 = 0.25 * i;
        const kedfl::KnifeEdge up[2] = {first, hall_edge(2.5, y2)};
        const kedfl::KnifeEdge down[2] = {first, hall_edge(2.5, -y2)};
        const double a_up = kedfl::attenuation_db(kedfl::field_ratio_multi(hall_link, up));
        const double a_down = kedfl::attenuation_db(kedfl::field_ratio_multi(hall_link, down));
        worst = std::max(worst, std::abs(a_up - a_down));
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail), "worst |A(y)-A(-y)| %.2e dB vs 1e-3 dB", worst);
    report(6, "cross-link symmetry over the across sweep", worst <= 1e-3, detail);
}

void criterion_7()
{
    const kedfl::KnifeEdge first = hall_edge(1.0);
    const double a_single = kedfl::attenuation_db(kedfl::field_ratio_single(hall_link, first));
    const kedfl::KnifeEdge pair[2] = {first, hall_edge(2.5, 2.5)};
    const double a_dual = kedfl::attenuation_db(kedfl::field_ratio_multi(hall_link, pair));
    const double diff = std::abs(a_dual - a_single);
    char detail[160];
    std::snprintf(detail, sizeof(detail), "|A(1,2)-A(1)| %.3f dB vs 1 dB at |y2|=2.5", diff);
    report(7, "off-axis target effect vanishes", diff < 1.0, detail);
}

void criterion_8()
{
    // The criterion pins d, lambda, the size ladder and h-H = 0.3; the link
    // height is free and is chosen clear of the floor so the remaining
    // paraxial error is dominated by the shrinking target.
    const kedfl::ScenarioGeometry geom{5.0, 0.75, hall_link.lambda};
    double prev = 1e9;
    bool strict = true;
    std::string gaps;
    for (double c : {0.4, 0.2, 0.1}) {
        const kedfl::KnifeEdge edge{2.5, 0.0, c, -geom.H, 0.3};
        const double exact = kedfl::attenuation_db(kedfl::field_ratio_single(geom, edge));
        const double par = kedfl::attenuation_db(kedfl::field_ratio_single_paraxial(geom, edge));
        const double gap = std::abs(exact - par);
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.4f ", gap);
        gaps += buf;
        strict = strict && gap < prev;
        prev = gap;
    }
    report(8, "paraxial error strictly decreases along the size ladder", strict,
           "gaps [dB]: " + gaps + "strictly decreasing");
}

void criterion_9()
{
    std::vector<kedfl::Body> bodies(2);
    bodies[0] = {0.3, 0.3, 1.8, 1.0, 0.0, 0.4, 0.0};
    bodies[1] = {0.3, 0.3, 1.8, 2.5, 0.0, -0.9, 0.0};
    kedfl::StatParams params;
    params.P_L = -50.0;
    params.sigma0_sq = 0.8;
    params.delta_mu_C = 0.3;
    params.delta_sigma_C_sq = 3.0;
    params.n_samples = 1000;
    params.seed = 4242;
    const auto stats =
        kedfl::attenuation_stats(hall_link, bodies, params, kedfl::Engine::pmbm);

    std::vector<kedfl::KnifeEdge> edges;
    for (const auto& b : bodies)
        edges.push_back(kedfl::make_edge(hall_link, b));
    const double a_db =
        kedfl::attenuation_db(kedfl::field_ratio_multi_paraxial(hall_link, edges));
    const bool exact_mu = stats.delta_mu == params.delta_mu_C - a_db;
    const bool exact_sigma = stats.delta_sigma_sq == params.delta_sigma_C_sq;
    char detail[160];
    std::snprintf(detail, sizeof(detail), "delta_mu exact: %s, delta_sigma_sq exact: %s",
                  exact_mu ? "yes" : "no", exact_sigma ? "yes" : "no");
    report(9, "degenerate statistics are exact for B=0 circular bodies", exact_mu && exact_sigma,
           detail);
}

void criterion_10()
{
    bool pass = true;
    std::string detail = "ratios: ";
    for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
        std::vector<kedfl::Body> bodies(1);
        bodies[0] = {0.25, 0.45, 1.8, 2.5, 0.0, 0.0, 0.15};
        kedfl::StatParams params;
        params.P_L = -50.0;
        params.sigma0_sq = 0.8;
        params.n_samples = 400;
        params.seed = seed;
        const auto small = kedfl::attenuation_stats(hall_link, bodies, params, kedfl::Engine::pmbm);
        params.n_samples = 1600;
        const auto big = kedfl::attenuation_stats(hall_link, bodies, params, kedfl::Engine::pmbm);
        const double ratio = big.mc_stderr / small.mc_stderr;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f ", ratio);
        detail += buf;
        pass = pass && ratio >= 0.4 && ratio <= 0.6;
    }
    report(10, "quadrupling the samples halves the Monte Carlo error", pass,
           detail + "vs [0.4, 0.6]");
}

void criterion_11(int threads)
{
    const auto start = Clock::now();
    const std::vector<double> truth_w = {0.25, 0.25};
    const std::vector<double> truth_h = {1.35, 1.35};
    kedfl::MeasurementSet meas;
    meas.mu0_dbm = -48.0;
    for (double x2 : {3.0, 3.5, 4.0, 4.5}) {
        kedfl::LandmarkMeasurement lm;
        lm.positions = {{2.5, 0.0}, {x2, 0.0}};
        lm.rss_mean_dbm =
            meas.mu0_dbm + kedfl::detail::predicted_delta_mu(hall_link, lm.positions, truth_w,
                                                             truth_h, kedfl::Engine::mbm, {}, 0.0);
        meas.landmarks.push_back(lm);
    }
    const std::vector<double> init_w = {0.4, 0.4};
    const std::vector<double> init_h = {1.7, 1.7};
    const auto result = kedfl::calibrate(hall_link, meas, init_w, init_h, kedfl::Engine::mbm, {},
                                         {}, 0.0, threads);
    const double elapsed = seconds_since(start);
    bool sizes_ok = true;
    for (std::size_t n = 0; n < 2; ++n) {
        sizes_ok = sizes_ok && std::abs(result.widths[n] - 0.25) <= 0.05 * 0.25;
        sizes_ok = sizes_ok && std::abs(result.heights[n] - 1.35) <= 0.05 * 1.35;
    }
    const bool pass = sizes_ok && result.residual_ss < 1e-6 && result.iterations <= 200 &&
                      result.converged && elapsed < 120.0;
    char detail[240];
    std::snprintf(detail, sizeof(detail),
                  "c=(%.4f, %.4f) h=(%.4f, %.4f) vs (0.25, 1.35)+-5%%, residual %.1e vs 1e-6, "
                  "%d iterations, %.0f s vs 120 s",
                  result.widths[0], result.widths[1], result.heights[0], result.heights[1],
                  result.residual_ss, result.iterations, elapsed);
    report(11, "calibration roundtrip recovers the sizes", pass, detail);
}

void criterion_12()
{
    // Both subjects contribute comparably here, the configuration where the
    // superposition baseline is known to break down. A tightened tolerance
    // keeps the engine error estimate well below the recorded gap.
    kedfl::QuadratureSpec tight;
    tight.rel_tol = 1e-5;
    const kedfl::KnifeEdge pair[2] = {hall_edge(0.5, 0.0, 0.25, 1.35),
                                      hall_edge(1.0, 0.0, 0.25, 1.35)};
    const auto mbm = kedfl::field_ratio_multi(hall_link, pair, tight);
    const double a_mbm = kedfl::attenuation_db(mbm);

    double a_add = 0.0;
    for (const auto& edge : pair)
        a_add += kedfl::attenuation_db(kedfl::field_ratio_single(hall_link, edge, tight));

    const double err_db = 20.0 / std::log(10.0) * mbm.err_estimate / std::abs(mbm.value);
    const double gap = std::abs(a_mbm - a_add);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "A_mbm %.3f dB, A_additive %.3f dB, |gap| %.3f dB vs 5x engine error %.2e dB",
                  a_mbm, a_add, gap, 5.0 * err_db);
    report(12, "mutual interaction exceeds the additive baseline significantly",
           gap >= 5.0 * err_db, detail);
}

// ---- criterion 13: CLI determinism ----

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args)
{
    const std::string cmd = std::string(KEDFL_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    RunResult result;
    if (!pipe)
        return result;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0)
        result.out.append(buf, got);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void criterion_13()
{
    const fs::path dir = fs::temp_directory_path() / "kedfl_acceptance";
    fs::create_directories(dir);

    const fs::path scene = dir / "scene.json";
    {
        std::ofstream out(scene);
        out << R"({
            "link": {"d_m": 5.0, "H_m": 0.9, "freq_hz": 2.486e9},
            "bodies": [
                {"a_m": 0.25, "b_m": 0.45, "h_m": 1.8, "x_m": 1.0, "B_m": 0.15},
                {"a_m": 0.25, "b_m": 0.45, "h_m": 1.8, "x_m": 2.5, "B_m": 0.15}
            ],
            "stats": {"P_L_dbm": -50.0, "sigma0_sq": 0.8, "dsigma_C_sq": 3.0,
                      "n_samples": 400, "seed": 17},
            "sweep": {"body": 2, "axis": "across", "start_m": -0.5, "stop_m": 0.5,
                      "step_m": 0.25}
        })";
    }
    const fs::path meas = dir / "meas.json";
    {
        // Landmark means generated once via the library (paraxial engine).
        std::ofstream out(meas);
        out << "{\n  \"landmarks\": [\n";
        bool first_row = true;
        for (double x2 : {3.0, 3.5, 4.0}) {
            const std::vector<double> w = {0.3, 0.3}, h = {1.5, 1.5};
            const std::vector<std::pair<double, double>> pos = {{2.5, 0.0}, {x2, 0.0}};
            const double mu =
                -48.0 + kedfl::detail::predicted_delta_mu(hall_link, pos, w, h,
                                                          kedfl::Engine::pmbm, {}, 0.0);
            char row[256];
            std::snprintf(row, sizeof(row),
                          "%s    {\"bodies\": [{\"x_m\": 2.5}, {\"x_m\": %.2f}], "
                          "\"rss_mean_dbm\": %.12f}",
                          first_row ? "" : ",\n", x2, mu);
            out << row;
            first_row = false;
        }
        out << "\n  ],\n  \"reference\": {\"mu0_dbm\": -48.0, \"sigma0_sq\": 0.8}\n}\n";
    }

    struct Command {
        std::string name;
        std::string args;
        fs::path artifact;  // empty when the command writes only to stdout
    };
    const fs::path csv = dir / "sweep.csv";
    const fs::path cal = dir / "cal.json";
    const std::vector<Command> commands = {
        {"predict", "predict --scenario " + scene.string(), {}},
        {"sweep", "sweep --scenario " + scene.string() + " --out " + csv.string(), csv},
        {"stats", "stats --scenario " + scene.string() + " --engine pmbm", {}},
        {"calibrate", "calibrate --scenario " + scene.string() + " --measurements " +
                          meas.string() + " --engine pmbm --out " + cal.string(),
         cal},
        {"oracle", "oracle --scenario " + scene.string(), {}},
    };

    bool pass = true;
    std::string detail;
    for (const Command& cmd : commands) {
        std::string ref_out, ref_artifact;
        int ref_code = -1;
        bool command_ok = true;
        for (int t : {1, 2, 8}) {
            const RunResult r = run_cli(cmd.args + " --threads " + std::to_string(t));
            const std::string artifact = cmd.artifact.empty() ? "" : slurp(cmd.artifact);
            if (t == 1) {
                ref_out = r.out;
                ref_artifact = artifact;
                ref_code = r.exit_code;
            } else if (r.out != ref_out || artifact != ref_artifact || r.exit_code != ref_code) {
                command_ok = false;
            }
        }
        if (ref_code != 0)
            command_ok = false;
        if (!command_ok) {
            pass = false;
            detail += cmd.name + " differs; ";
        }
    }
    if (detail.empty())
        detail = "predict/sweep/stats/calibrate/oracle byte-identical across 1, 2, 8 threads";
    report(13, "CLI output is deterministic across thread counts", pass, detail);
}

}  // namespace

int main()
{
    const int threads = kedfl::resolve_thread_count(0);
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4(threads);
    criterion_5(threads);
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11(threads);
    criterion_12();
    criterion_13();
    if (failures == 0)
        std::printf("all 13 acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
