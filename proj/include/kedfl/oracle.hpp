#ifndef KEDFL_ORACLE_HPP
#define KEDFL_ORACLE_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "kedfl/geometry.hpp"
#include "kedfl/parallel.hpp"
#include "kedfl/types.hpp"

// Brute-force validator: literal midpoint Riemann sums of the cascaded
// Huygens kernel. Deliberately dumb and fully independent of the quadrature
// engines so that agreement between the two is evidential.

namespace kedfl {

namespace oracle_detail {

struct MidGrid {
    std::vector<double> y;
    std::vector<double> z;
    double cell_area = 0.0;
};

inline MidGrid midpoint_grid(const KnifeEdge& edge, double step)
{
    const double width = edge.y_hi() - edge.y_lo();
    const double height = edge.z_hi - edge.z_lo;
    const std::size_t ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(width / step)));
    const std::size_t nz = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(height / step)));
    if (ny * nz > 8'000'000)
        throw error("oracle: memory guard exceeded (grid too fine for the surface size)");
    MidGrid grid;
    const double dy = width / static_cast<double>(ny);
    const double dz = height / static_cast<double>(nz);
    grid.cell_area = dy * dz;
    grid.y.reserve(ny * nz);
    grid.z.reserve(ny * nz);
    for (std::size_t i = 0; i < ny; ++i) {
        const double y = edge.y_lo() + (static_cast<double>(i) + 0.5) * dy;
        for (std::size_t j = 0; j < nz; ++j) {
            grid.y.push_back(y);
            grid.z.push_back(edge.z_lo + (static_cast<double>(j) + 0.5) * dz);
        }
    }
    return grid;
}

inline cplx phasor(double phase)
{
    return {std::cos(phase), std::sin(phase)};
}

inline cplx psi_single_sum(const ScenarioGeometry& geom, const KnifeEdge& edge, double step)
{
    const double k0 = 2.0 * std::numbers::pi / geom.lambda;
    const MidGrid grid = midpoint_grid(edge, step);
    const double x1 = edge.x;
    const double x2 = geom.d - edge.x;
    cplx sum{0.0, 0.0};
    for (std::size_t p = 0; p < grid.y.size(); ++p) {
        const double y = grid.y[p];
        const double z = grid.z[p];
        const double r1 = std::sqrt(x1 * x1 + y * y + z * z);
        const double r2 = std::sqrt(x2 * x2 + y * y + z * z);
        sum += phasor(-k0 * (r1 + r2 - geom.d)) / (r1 * r2);
    }
    return cplx(0.0, 1.0) * (geom.d / geom.lambda) * grid.cell_area * sum;
}

inline cplx psi_pair_sum(const ScenarioGeometry& geom, const KnifeEdge& first,
                         const KnifeEdge& second, double step, int threads)
{
    const double k0 = 2.0 * std::numbers::pi / geom.lambda;
    const MidGrid g1 = midpoint_grid(first, step);
    const MidGrid g2 = midpoint_grid(second, step);
    const double xa = first.x;
    const double dx = second.x - first.x;
    const double dx2 = dx * dx;
    const double xb = geom.d - second.x;

    // Fixed chunking keeps the reduction order independent of thread count.
    const std::size_t n1 = g1.y.size();
    const std::size_t chunks = std::min<std::size_t>(64, n1);
    std::vector<cplx> partial(chunks, cplx(0.0, 0.0));
    run_indexed(chunks, threads, [&](std::size_t c) {
        const std::size_t lo = n1 * c / chunks;
        const std::size_t hi = n1 * (c + 1) / chunks;
        cplx acc{0.0, 0.0};
        for (std::size_t p = lo; p < hi; ++p) {
            const double y1 = g1.y[p];
            const double z1 = g1.z[p];
            const double r1 = std::sqrt(xa * xa + y1 * y1 + z1 * z1);
            for (std::size_t q = 0; q < g2.y.size(); ++q) {
                const double y2 = g2.y[q];
                const double z2 = g2.z[q];
                const double ddy = y2 - y1;
                const double ddz = z2 - z1;
                const double r12 = std::sqrt(dx2 + ddy * ddy + ddz * ddz);
                const double r2 = std::sqrt(xb * xb + y2 * y2 + z2 * z2);
                acc += phasor(-k0 * (r1 + r12 + r2 - geom.d)) / (r1 * r12 * r2);
            }
        }
        partial[c] = acc;
    });
    cplx sum{0.0, 0.0};
    for (const cplx& part : partial)
        sum += part;
    return -1.0 * (geom.d / (geom.lambda * geom.lambda)) * g1.cell_area * g2.cell_area * sum;
}

inline bool zero_measure(const KnifeEdge& edge)
{
    return !(edge.width > 0.0) || !(edge.z_hi > edge.z_lo);
}

inline cplx psi_for(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges, double step,
                    int threads)
{
    for (const KnifeEdge& e : edges)
        if (zero_measure(e))
            return {0.0, 0.0};
    for (const KnifeEdge& e : edges)
        if (!in_link_span(geom, e.x))
            throw validation_error("oracle: screen outside (0, d)");
    if (edges.size() == 1)
        return psi_single_sum(geom, edges[0], step);
    if (!(edges[1].x > edges[0].x))
        throw validation_error("oracle: screens must be strictly increasing in x");
    return psi_pair_sum(geom, edges[0], edges[1], step, threads);
}

inline void check_step(const ScenarioGeometry& geom, double grid_step)
{
    if (!(grid_step > 0.0) || grid_step > geom.lambda / 6.0)
        throw schema_error("oracle: grid step must be positive and at most lambda/6");
}

}  // namespace oracle_detail

/// Midpoint-sum obstruction integral for one or two screens.
inline cplx oracle_psi(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                       double grid_step, int threads = 1)
{
    if (edges.empty())
        throw validation_error("oracle_psi: empty subset");
    if (edges.size() > 2)
        throw capability_error("oracle: more than two screens is not supported");
    oracle_detail::check_step(geom, grid_step);
    return oracle_detail::psi_for(geom, edges, grid_step, threads);
}

/// E/E0 by direct summation, with the complement domains expanded through
/// the same inclusion-exclusion set identity the engine derivation uses:
///   E/E0 = sum over subsets U of (-1)^|U| Psi(U),  Psi(empty) = 1.
/// err_estimate compares against a grid twice as coarse.
inline FieldRatio oracle_field_ratio(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                                     double grid_step, int threads = 1)
{
    if (edges.size() > 2)
        throw capability_error("oracle: more than two screens is not supported");
    oracle_detail::check_step(geom, grid_step);

    auto value_at = [&](double step) -> cplx {
        cplx value{1.0, 0.0};
        for (std::size_t i = 0; i < edges.size(); ++i)
            value -= oracle_detail::psi_for(geom, edges.subspan(i, 1), step, threads);
        if (edges.size() == 2)
            value += oracle_detail::psi_for(geom, edges, step, threads);
        return value;
    };

    const cplx fine = value_at(grid_step);
    const cplx coarse = value_at(2.0 * grid_step);
    return {fine, std::abs(fine - coarse)};
}

}  // namespace kedfl

#endif
