#ifndef KEDFL_STATISTICAL_HPP
#define KEDFL_STATISTICAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "kedfl/diffraction_full.hpp"
#include "kedfl/diffraction_paraxial.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/parallel.hpp"
#include "kedfl/rng.hpp"
#include "kedfl/types.hpp"

namespace kedfl {

/// Parameters of the physical-statistical RSS layer. The residual multipath
/// terms delta_mu_C / delta_sigma_C_sq and the background sigma0_sq come
/// from an empty-scene calibration; they are not synthesized here.
struct StatParams {
    double P_L = 0.0;               // free-space received power, dBm
    double sigma0_sq = 0.0;         // background variance, dB^2
    double delta_mu_C = 0.0;        // residual multipath mean, dB
    double delta_sigma_C_sq = 0.0;  // residual multipath variance, dB^2
    double B = 0.0;                 // default movement half-range, m
    int n_samples = 1000;
    std::uint64_t seed = 0;
};

struct AttenuationStats {
    double delta_mu = 0.0;        // dB
    double delta_sigma_sq = 0.0;  // dB^2
    double mu1 = 0.0;             // dBm
    double sigma1_sq = 0.0;       // dB^2
    double mc_stderr = 0.0;       // dB
};

// Practical sensing-region cutoffs: beyond 5*R_max off axis the body effect
// is negligible and the background branch applies; within half a wavelength
// of either antenna the far-field kernel has no validity (antenna near
// field), so such bodies are background as well.
inline constexpr double scope_cutoff_factor = 5.0;

inline bool in_sensing_region(const ScenarioGeometry& geom, double x, double y)
{
    const double margin = 0.5 * geom.lambda;
    return x > margin && x < geom.d - margin &&
           std::abs(y) <= scope_cutoff_factor * geom.r_max();
}

inline bool any_body_in_region(const ScenarioGeometry& geom, std::span<const Body> bodies)
{
    return std::any_of(bodies.begin(), bodies.end(),
                       [&](const Body& b) { return in_sensing_region(geom, b.x, b.y); });
}

inline FieldRatio field_ratio_for(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                                  Engine engine, const QuadratureSpec& spec)
{
    return engine == Engine::mbm ? field_ratio_multi(geom, edges, spec)
                                 : field_ratio_multi_paraxial(geom, edges, spec);
}

/// Background RSS model: mu0 = P_L, variance sigma0^2.
inline std::pair<double, double> rss_empty(const StatParams& params)
{
    return {params.P_L, params.sigma0_sq};
}

namespace detail {

// Screens for one Monte Carlo draw. A body displaced out of the sensing
// region contributes no obstruction for that sample. Bodies whose
// displacements bring them closer than half a wavelength along the link are
// merged into their union silhouette: below that separation the forward
// cascade between distinct screens has no validity, and the near-unit
// coupling would be numerically singular.
inline std::vector<KnifeEdge> draw_sample_edges(const ScenarioGeometry& geom,
                                                std::span<const Body> bodies, std::uint64_t seed,
                                                std::uint64_t sample)
{
    std::vector<KnifeEdge> edges;
    edges.reserve(bodies.size());
    for (std::size_t n = 0; n < bodies.size(); ++n) {
        Body moved = bodies[n];
        const double bound = moved.move_bound;
        moved.chi = uniform(seed, sample, 3 * n, -std::numbers::pi, std::numbers::pi);
        moved.x += uniform(seed, sample, 3 * n + 1, -bound, bound);
        moved.y += uniform(seed, sample, 3 * n + 2, -bound, bound);
        if (in_sensing_region(geom, moved.x, moved.y))
            edges.push_back(make_edge(geom, moved));
    }
    std::sort(edges.begin(), edges.end(),
              [](const KnifeEdge& a, const KnifeEdge& b) { return a.x < b.x; });
    std::vector<KnifeEdge> kept;
    kept.reserve(edges.size());
    for (const KnifeEdge& e : edges) {
        if (!kept.empty() && e.x - kept.back().x < 0.5 * geom.lambda) {
            KnifeEdge& prev = kept.back();
            const double y_lo = std::min(prev.y_lo(), e.y_lo());
            const double y_hi = std::max(prev.y_hi(), e.y_hi());
            prev.y_center = 0.5 * (y_lo + y_hi);
            prev.width = y_hi - y_lo;
            prev.z_hi = std::max(prev.z_hi, e.z_hi);
        } else {
            kept.push_back(e);
        }
    }
    return kept;
}

inline double scene_attenuation_db(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                                   Engine engine, const QuadratureSpec& spec)
{
    if (edges.empty())
        return 0.0;
    return attenuation_db(field_ratio_for(geom, edges, engine, spec));
}

}  // namespace detail

/// Mean/variance increments of the received power under random orientation
/// and micro-movement of the bodies:
///   delta_mu = delta_mu_C - E[A],   delta_sigma^2 = delta_sigma_C^2 + Var[A].
/// Fixed seed implies bit-reproducible output, independent of thread count.
inline AttenuationStats attenuation_stats(const ScenarioGeometry& geom,
                                          std::span<const Body> bodies, const StatParams& params,
                                          Engine engine, const QuadratureSpec& spec = {},
                                          int threads = 1)
{
    if (!any_body_in_region(geom, bodies))
        throw validation_error("attenuation_stats: no body inside the sensing region");
    if (params.n_samples < 1)
        throw schema_error("attenuation_stats: n_samples must be >= 1");

    AttenuationStats stats;

    const bool degenerate = std::all_of(bodies.begin(), bodies.end(), [](const Body& b) {
        return b.move_bound == 0.0 && b.a == b.b;
    });
    if (degenerate) {
        // Orientation and movement distributions are point masses: the
        // attenuation is the deterministic nominal-scene value, with no
        // Monte Carlo noise.
        std::vector<KnifeEdge> edges;
        for (const Body& b : bodies)
            if (in_sensing_region(geom, b.x, b.y))
                edges.push_back(make_edge(geom, b));
        std::sort(edges.begin(), edges.end(),
                  [](const KnifeEdge& a, const KnifeEdge& b) { return a.x < b.x; });
        const double a_db = detail::scene_attenuation_db(geom, edges, engine, spec);
        stats.delta_mu = params.delta_mu_C - a_db;
        stats.delta_sigma_sq = params.delta_sigma_C_sq;
        stats.mc_stderr = 0.0;
    } else {
        const std::size_t n = static_cast<std::size_t>(params.n_samples);
        std::vector<double> a_db(n, 0.0);
        run_indexed(n, threads, [&](std::size_t i) {
            const std::vector<KnifeEdge> edges =
                detail::draw_sample_edges(geom, bodies, params.seed, i);
            a_db[i] = detail::scene_attenuation_db(geom, edges, engine, spec);
        });

        double mean = 0.0;
        for (double a : a_db)
            mean += a;
        mean /= static_cast<double>(n);
        double var = 0.0;
        if (n > 1) {
            for (double a : a_db)
                var += (a - mean) * (a - mean);
            var /= static_cast<double>(n - 1);
        }
        stats.delta_mu = params.delta_mu_C - mean;
        stats.delta_sigma_sq = params.delta_sigma_C_sq + var;
        stats.mc_stderr = std::sqrt(var / static_cast<double>(n));
    }

    stats.mu1 = params.P_L + stats.delta_mu;
    stats.sigma1_sq = params.sigma0_sq + stats.delta_sigma_sq;
    return stats;
}

/// Superposition baseline: sum of single-body attenuations with all other
/// bodies removed. Ignores the mutual interaction term by construction.
inline double additive_attenuation(const ScenarioGeometry& geom, std::span<const Body> bodies,
                                   Engine family, const QuadratureSpec& spec = {})
{
    double total = 0.0;
    for (const Body& b : bodies) {
        if (!in_link_span(geom, b.x))
            continue;
        const KnifeEdge edge = make_edge(geom, b);
        const FieldRatio ratio = family == Engine::mbm
                                     ? field_ratio_single(geom, edge, spec)
                                     : field_ratio_single_paraxial(geom, edge);
        total += attenuation_db(ratio);
    }
    return total;
}

/// RSS mean and variance: body branch when at least one body is in the
/// sensing region, background branch otherwise.
inline std::pair<double, double> predict_rss(const ScenarioGeometry& geom,
                                             std::span<const Body> bodies,
                                             const StatParams& params, Engine engine,
                                             const QuadratureSpec& spec = {}, int threads = 1)
{
    if (!any_body_in_region(geom, bodies))
        return rss_empty(params);
    const AttenuationStats stats = attenuation_stats(geom, bodies, params, engine, spec, threads);
    return {stats.mu1, stats.sigma1_sq};
}

}  // namespace kedfl

#endif
