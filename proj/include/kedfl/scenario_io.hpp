#ifndef KEDFL_SCENARIO_IO_HPP
#define KEDFL_SCENARIO_IO_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kedfl/calibration.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/statistical.hpp"
#include "kedfl/types.hpp"

namespace kedfl {

/// One-dimensional position sweep of a single body, the others fixed.
struct SweepSpec {
    int body_index = 1;  // 1-based, matching target numbering
    enum class Axis { along, across } axis = Axis::along;
    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
};

/// One scenario document drives every command; stats and sweep are optional
/// sections of the same file.
struct Scenario {
    ScenarioGeometry geometry;
    std::vector<Body> bodies;
    std::optional<StatParams> stats;
    std::optional<SweepSpec> sweep;
};

namespace io_detail {

using nlohmann::json;

inline std::string joined(const std::string& ctx, const std::string& key)
{
    return ctx.empty() ? key : ctx + "." + key;
}

inline void check_keys(const json& j, const std::string& ctx,
                       std::initializer_list<const char*> allowed)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw schema_error("unknown key \"" + joined(ctx, it.key()) + "\"");
    }
}

inline const json& require(const json& j, const std::string& ctx, const char* key)
{
    if (!j.contains(key))
        throw schema_error("missing key \"" + joined(ctx, key) + "\"");
    return j.at(key);
}

inline double number(const json& v, const std::string& where)
{
    if (!v.is_number())
        throw schema_error("key \"" + where + "\" must be a number");
    return v.get<double>();
}

inline double require_number(const json& j, const std::string& ctx, const char* key)
{
    return number(require(j, ctx, key), joined(ctx, key));
}

inline double optional_number(const json& j, const std::string& ctx, const char* key, double def)
{
    if (!j.contains(key))
        return def;
    return number(j.at(key), joined(ctx, key));
}

inline std::uint64_t require_seed(const json& j, const std::string& ctx, const char* key)
{
    const json& v = require(j, ctx, key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw schema_error("key \"" + joined(ctx, key) + "\" must be an integer seed");
    if (v.is_number_integer() && v.get<std::int64_t>() < 0)
        throw schema_error("key \"" + joined(ctx, key) + "\" must be non-negative");
    return v.get<std::uint64_t>();
}

}  // namespace io_detail

inline Scenario parse_scenario(const nlohmann::json& j)
{
    using io_detail::check_keys;
    using io_detail::optional_number;
    using io_detail::require;
    using io_detail::require_number;

    if (!j.is_object())
        throw schema_error("scenario document must be a JSON object");
    check_keys(j, "", {"link", "bodies", "stats", "sweep"});

    Scenario sc;

    const auto& link = require(j, "", "link");
    if (!link.is_object())
        throw schema_error("key \"link\" must be an object");
    check_keys(link, "link", {"d_m", "H_m", "freq_hz", "lambda_m"});
    const double d = require_number(link, "link", "d_m");
    const double H = require_number(link, "link", "H_m");
    const bool has_freq = link.contains("freq_hz");
    const bool has_lambda = link.contains("lambda_m");
    if (has_freq == has_lambda)
        throw schema_error("link: give exactly one of \"freq_hz\" or \"lambda_m\"");
    sc.geometry = has_freq
                      ? geometry_from_frequency(d, H, require_number(link, "link", "freq_hz"))
                      : geometry_from_wavelength(d, H, require_number(link, "link", "lambda_m"));

    std::vector<bool> body_has_bound;
    if (j.contains("bodies")) {
        const auto& bodies = j.at("bodies");
        if (!bodies.is_array())
            throw schema_error("key \"bodies\" must be an array");
        int idx = 0;
        for (const auto& jb : bodies) {
            const std::string ctx = "bodies[" + std::to_string(idx) + "]";
            if (!jb.is_object())
                throw schema_error(ctx + " must be an object");
            check_keys(jb, ctx, {"a_m", "b_m", "h_m", "x_m", "y_m", "chi_rad", "B_m"});
            Body b;
            b.a = require_number(jb, ctx, "a_m");
            b.b = require_number(jb, ctx, "b_m");
            b.h = require_number(jb, ctx, "h_m");
            b.x = require_number(jb, ctx, "x_m");
            b.y = optional_number(jb, ctx, "y_m", 0.0);
            b.chi = std::remainder(optional_number(jb, ctx, "chi_rad", 0.0),
                                   2.0 * std::numbers::pi);
            b.move_bound = optional_number(jb, ctx, "B_m", 0.0);
            if (!(b.a > 0.0) || !(b.b >= b.a))
                throw schema_error(ctx + ": requires 0 < a_m <= b_m");
            if (!(b.h > 0.0))
                throw schema_error(ctx + ": requires h_m > 0");
            if (b.move_bound < 0.0)
                throw schema_error(ctx + ": requires B_m >= 0");
            body_has_bound.push_back(jb.contains("B_m"));
            sc.bodies.push_back(b);
            ++idx;
        }
    }

    if (j.contains("stats")) {
        const auto& js = j.at("stats");
        if (!js.is_object())
            throw schema_error("key \"stats\" must be an object");
        check_keys(js, "stats",
                   {"P_L_dbm", "sigma0_sq", "dmu_C", "dsigma_C_sq", "B_m", "n_samples", "seed"});
        StatParams p;
        p.P_L = require_number(js, "stats", "P_L_dbm");
        p.sigma0_sq = require_number(js, "stats", "sigma0_sq");
        p.delta_mu_C = optional_number(js, "stats", "dmu_C", 0.0);
        p.delta_sigma_C_sq = optional_number(js, "stats", "dsigma_C_sq", 0.0);
        p.B = optional_number(js, "stats", "B_m", 0.0);
        const double n_samples = optional_number(js, "stats", "n_samples", 1000.0);
        p.n_samples = static_cast<int>(n_samples);
        p.seed = io_detail::require_seed(js, "stats", "seed");
        if (p.sigma0_sq < 0.0 || p.delta_sigma_C_sq < 0.0)
            throw schema_error("stats: variances must be non-negative");
        if (p.B < 0.0)
            throw schema_error("stats: B_m must be non-negative");
        if (p.n_samples < 1)
            throw schema_error("stats: n_samples must be >= 1");
        sc.stats = p;
        // stats.B_m provides the movement bound for bodies that left it out
        for (std::size_t n = 0; n < sc.bodies.size(); ++n)
            if (!body_has_bound[n])
                sc.bodies[n].move_bound = p.B;
    }

    if (j.contains("sweep")) {
        const auto& jw = j.at("sweep");
        if (!jw.is_object())
            throw schema_error("key \"sweep\" must be an object");
        check_keys(jw, "sweep", {"body", "axis", "start_m", "stop_m", "step_m"});
        SweepSpec sw;
        const auto& body = require(jw, "sweep", "body");
        if (!body.is_number_integer() && !body.is_number_unsigned())
            throw schema_error("key \"sweep.body\" must be an integer (1-based)");
        sw.body_index = body.get<int>();
        if (sw.body_index < 1 || sw.body_index > static_cast<int>(sc.bodies.size()))
            throw schema_error("sweep.body out of range");
        const auto& axis = require(jw, "sweep", "axis");
        if (!axis.is_string())
            throw schema_error("key \"sweep.axis\" must be \"along\" or \"across\"");
        const std::string ax = axis.get<std::string>();
        if (ax == "along")
            sw.axis = SweepSpec::Axis::along;
        else if (ax == "across")
            sw.axis = SweepSpec::Axis::across;
        else
            throw schema_error("key \"sweep.axis\" must be \"along\" or \"across\"");
        sw.start = require_number(jw, "sweep", "start_m");
        sw.stop = require_number(jw, "sweep", "stop_m");
        sw.step = require_number(jw, "sweep", "step_m");
        if (!(sw.step > 0.0))
            throw schema_error("sweep.step_m must be > 0");
        if (sw.stop < sw.start)
            throw schema_error("sweep.stop_m must be >= sweep.start_m");
        sc.sweep = sw;
    }

    return sc;
}

inline MeasurementSet parse_measurements(const nlohmann::json& j)
{
    using io_detail::check_keys;
    using io_detail::optional_number;
    using io_detail::require;
    using io_detail::require_number;

    if (!j.is_object())
        throw schema_error("measurement document must be a JSON object");
    check_keys(j, "", {"landmarks", "reference"});

    MeasurementSet set;
    const auto& ref = require(j, "", "reference");
    if (!ref.is_object())
        throw schema_error("key \"reference\" must be an object");
    check_keys(ref, "reference", {"mu0_dbm", "sigma0_sq"});
    set.mu0_dbm = require_number(ref, "reference", "mu0_dbm");
    set.sigma0_sq = optional_number(ref, "reference", "sigma0_sq", 0.0);

    const auto& landmarks = require(j, "", "landmarks");
    if (!landmarks.is_array() || landmarks.empty())
        throw schema_error("key \"landmarks\" must be a non-empty array");
    int idx = 0;
    for (const auto& jl : landmarks) {
        const std::string ctx = "landmarks[" + std::to_string(idx) + "]";
        if (!jl.is_object())
            throw schema_error(ctx + " must be an object");
        check_keys(jl, ctx, {"bodies", "rss_mean_dbm", "rss_var_db2", "samples"});
        LandmarkMeasurement lm;
        const auto& jb = require(jl, ctx, "bodies");
        if (!jb.is_array() || jb.empty())
            throw schema_error(ctx + ".bodies must be a non-empty array");
        int bidx = 0;
        for (const auto& pos : jb) {
            const std::string bctx = ctx + ".bodies[" + std::to_string(bidx) + "]";
            if (!pos.is_object())
                throw schema_error(bctx + " must be an object");
            check_keys(pos, bctx, {"x_m", "y_m"});
            lm.positions.emplace_back(require_number(pos, bctx, "x_m"),
                                      optional_number(pos, bctx, "y_m", 0.0));
            ++bidx;
        }
        lm.rss_mean_dbm = require_number(jl, ctx, "rss_mean_dbm");
        lm.rss_var_db2 = optional_number(jl, ctx, "rss_var_db2", 0.0);
        if (lm.rss_var_db2 < 0.0)
            throw schema_error(ctx + ".rss_var_db2 must be >= 0");
        lm.samples = static_cast<int>(optional_number(jl, ctx, "samples", 0.0));
        set.landmarks.push_back(std::move(lm));
        ++idx;
    }
    return set;
}

namespace io_detail {

inline nlohmann::json load_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw schema_error("cannot open file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw schema_error("invalid JSON in " + path + ": " + e.what());
    }
}

}  // namespace io_detail

inline Scenario load_scenario_file(const std::string& path)
{
    return parse_scenario(io_detail::load_json_file(path));
}

inline MeasurementSet load_measurements_file(const std::string& path)
{
    return parse_measurements(io_detail::load_json_file(path));
}

}  // namespace kedfl

#endif
