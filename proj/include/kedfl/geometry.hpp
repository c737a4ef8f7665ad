#ifndef KEDFL_GEOMETRY_HPP
#define KEDFL_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kedfl/types.hpp"

namespace kedfl {

inline constexpr double speed_of_light_m_s = 299792458.0;

// Degenerate-separation threshold: below lambda/10 the 1/r coupling kernel
// between consecutive screens is numerically singular and the forward-only
// model has no physical validity anyway.
inline constexpr double degenerate_separation_factor = 0.1;

/// Radio link: TX at (0,0,0), RX at (d,0,0), both at height H above the floor.
/// Wavelength is the canonical stored quantity; frequency is converted once
/// at ingestion.
struct ScenarioGeometry {
    double d = 0.0;       // link length, m
    double H = 0.0;       // link height above floor, m
    double lambda = 0.0;  // wavelength, m

    double r_max() const { return 0.5 * std::sqrt(lambda * d); }

    // First Fresnel zone clears the floor iff 2H > sqrt(lambda*d).
    bool clearance_ok() const { return 2.0 * H > std::sqrt(lambda * d); }
};

inline ScenarioGeometry geometry_from_wavelength(double d, double H, double lambda)
{
    if (!(d > 0.0) || !(H > 0.0) || !(lambda > 0.0))
        throw schema_error("link geometry requires d > 0, H > 0, lambda > 0");
    return ScenarioGeometry{d, H, lambda};
}

inline ScenarioGeometry geometry_from_frequency(double d, double H, double freq_hz)
{
    if (!(freq_hz > 0.0))
        throw schema_error("link geometry requires freq_hz > 0");
    return geometry_from_wavelength(d, H, speed_of_light_m_s / freq_hz);
}

/// A target body: absorbing elliptical cylinder standing on the floor.
struct Body {
    double a = 0.0;           // minor axis, m
    double b = 0.0;           // major axis, m
    double h = 0.0;           // height, m
    double x = 0.0;           // along-link position, m
    double y = 0.0;           // cross-link offset, m
    double chi = 0.0;         // orientation vs LOS, rad in [-pi, pi]
    double move_bound = 0.0;  // movement half-range B, m
};

/// Silhouette width of the elliptical cylinder seen along the LOS for
/// orientation chi; always inside [a, b].
inline double effective_width(const Body& body)
{
    const double s = std::sin(body.chi);
    const double c = std::cos(body.chi);
    return std::sqrt(body.a * body.a * s * s + body.b * body.b * c * c);
}

/// Forward-only diffraction is defined for bodies strictly between TX and RX.
inline bool in_link_span(const ScenarioGeometry& geom, double x)
{
    return x > 0.0 && x < geom.d;
}

/// Resolved 2D absorbing screen, orthogonal to the LOS. Vertical extent is
/// expressed relative to the link axis (z = 0 at link height).
struct KnifeEdge {
    double x = 0.0;         // along-link position, m
    double y_center = 0.0;  // cross-link offset of the screen center, m
    double width = 0.0;     // traversal width c, m
    double z_lo = 0.0;      // -H for a body on the floor
    double z_hi = 0.0;      // h - H

    double y_lo() const { return y_center - 0.5 * width; }
    double y_hi() const { return y_center + 0.5 * width; }
};

inline KnifeEdge make_edge(const ScenarioGeometry& geom, const Body& body)
{
    return KnifeEdge{body.x, body.y, effective_width(body), -geom.H, body.h - geom.H};
}

/// Segment lengths of the LOS path split by the active screens:
/// segments[0] = TX->S1, segments[i] = S_i->S_{i+1}, segments[N] = S_N->RX.
struct LinkPartition {
    std::vector<double> positions;
    std::vector<double> segments;

    std::size_t body_count() const { return positions.size(); }
};

inline LinkPartition partition(const ScenarioGeometry& geom, const std::vector<double>& positions)
{
    LinkPartition part;
    part.positions = positions;
    double prev = 0.0;
    for (double x : positions) {
        if (!in_link_span(geom, x))
            throw validation_error("partition: screen position outside (0, d)");
        if (x <= prev)
            throw validation_error("partition: screen positions must be strictly increasing");
        part.segments.push_back(x - prev);
        prev = x;
    }
    part.segments.push_back(geom.d - prev);
    return part;
}

/// Generalized Fresnel radii R_n (from the two segments adjacent to each
/// screen) and the couplings alpha_{n,n+1} = R_n*R_{n+1}/(lambda*d_{n,n+1})
/// between consecutive screens. All alpha lie in (0,1) for positive segments.
struct ParaxialConstants {
    std::vector<double> radius;  // R_n, size N
    std::vector<double> alpha;   // alpha_{n,n+1}, size N-1
};

inline ParaxialConstants generalized_radii_and_couplings(const LinkPartition& part, double lambda)
{
    const std::size_t n = part.body_count();
    if (n == 0)
        throw validation_error("generalized radii require at least one screen");
    for (double seg : part.segments)
        if (!(seg > 0.0))
            throw validation_error("generalized radii: zero-length link segment");

    ParaxialConstants out;
    out.radius.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double left = part.segments[i];
        const double right = part.segments[i + 1];
        out.radius.push_back(std::sqrt(lambda * left * right / (left + right)));
    }
    for (std::size_t i = 0; i + 1 < n; ++i)
        out.alpha.push_back(out.radius[i] * out.radius[i + 1] / (lambda * part.segments[i + 1]));
    return out;
}

/// First Fresnel zone radius at along-link position x.
inline double fresnel_radius(const ScenarioGeometry& geom, double x)
{
    if (!in_link_span(geom, x))
        throw validation_error("fresnel_radius: position outside (0, d)");
    return std::sqrt(geom.lambda * x * (geom.d - x) / geom.d);
}

enum class Severity { info, warning, error };

struct Finding {
    Severity severity = Severity::info;
    std::string message;
    int body_index = -1;  // -1 when not body-specific
};

struct ValidationReport {
    std::vector<Finding> findings;

    bool has_errors() const
    {
        return std::any_of(findings.begin(), findings.end(),
                           [](const Finding& f) { return f.severity == Severity::error; });
    }
    bool clearance_violation() const
    {
        return std::any_of(findings.begin(), findings.end(), [](const Finding& f) {
            return f.severity == Severity::warning && f.body_index < 0;
        });
    }
};

/// Report-only checks: clearance constraint, bodies outside the link span
/// (inactive), and degenerate screen separations (error level, below
/// lambda/10). Downstream operations reject error-level reports.
inline ValidationReport validate(const ScenarioGeometry& geom, const std::vector<Body>& bodies)
{
    ValidationReport report;
    if (!geom.clearance_ok())
        report.findings.push_back(
            {Severity::warning,
             "clearance constraint violated (2H <= sqrt(lambda*d)): floor effects are no longer negligible",
             -1});

    std::vector<std::pair<double, int>> active;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        if (!in_link_span(geom, bodies[i].x))
            report.findings.push_back({Severity::info,
                                       "body outside the link span (0, d): inactive",
                                       static_cast<int>(i)});
        else
            active.emplace_back(bodies[i].x, static_cast<int>(i));
    }

    std::sort(active.begin(), active.end());
    const double min_sep = degenerate_separation_factor * geom.lambda;
    for (std::size_t i = 0; i + 1 < active.size(); ++i) {
        if (std::abs(active[i + 1].first - active[i].first) < min_sep)
            report.findings.push_back({Severity::error,
                                       "degenerate separation: bodies closer than lambda/10 along the link",
                                       active[i].second});
    }
    return report;
}

}  // namespace kedfl

#endif
