#ifndef KEDFL_DIFFRACTION_FULL_HPP
#define KEDFL_DIFFRACTION_FULL_HPP

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "kedfl/gauss.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/types.hpp"

namespace kedfl {

namespace detail {

// Flattened tensor grid over one screen rectangle.
struct ScreenGrid {
    std::vector<double> y;
    std::vector<double> z;
    std::vector<double> w;  // product weight
};

inline ScreenGrid make_screen_grid(const KnifeEdge& edge, int panels_y, int panels_z, int order)
{
    const Grid1D gy = composite_gauss(edge.y_lo(), edge.y_hi(), panels_y, order);
    const Grid1D gz = composite_gauss(edge.z_lo, edge.z_hi, panels_z, order);
    ScreenGrid grid;
    const std::size_t n = gy.x.size() * gz.x.size();
    grid.y.reserve(n);
    grid.z.reserve(n);
    grid.w.reserve(n);
    for (std::size_t i = 0; i < gy.x.size(); ++i)
        for (std::size_t j = 0; j < gz.x.size(); ++j) {
            grid.y.push_back(gy.x[i]);
            grid.z.push_back(gz.x[j]);
            grid.w.push_back(gy.w[i] * gz.w[j]);
        }
    return grid;
}

// Path-length excess over a leg of along-link length L when the transverse
// offset can reach w; bounds the phase swing along one dimension.
inline double leg_phase_var(double L, double w)
{
    return std::hypot(L, w) - L;
}

inline int phase_panels(double tv_rad, const QuadratureSpec& spec, int order)
{
    const double per_panel = spec.phase_step * order;
    const int p = static_cast<int>(std::ceil(tv_rad / per_panel));
    return p < 1 ? 1 : p;
}

inline cplx unit_phasor(double phase)
{
    return {std::cos(phase), std::sin(phase)};
}

inline cplx j_power(std::size_t k)
{
    switch (k % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
    }
}

// Cascaded Huygens propagation TX -> S_1 -> ... -> S_k -> RX on fixed grids.
// The multi-screen kernel factorizes along the chain, so the k-rectangle
// tensor quadrature reduces to successive plane-to-plane sums.
inline cplx chain_psi(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                      const std::vector<ScreenGrid>& grids)
{
    const double k0 = 2.0 * std::numbers::pi / geom.lambda;
    const std::size_t k = edges.size();

    const ScreenGrid& first = grids[0];
    std::vector<cplx> field(first.w.size());
    const double x0 = edges[0].x;
    for (std::size_t p = 0; p < field.size(); ++p) {
        const double r = std::sqrt(x0 * x0 + first.y[p] * first.y[p] + first.z[p] * first.z[p]);
        field[p] = first.w[p] / r * unit_phasor(-k0 * r);
    }

    for (std::size_t n = 1; n < k; ++n) {
        const ScreenGrid& src = grids[n - 1];
        const ScreenGrid& dst = grids[n];
        const double dx = edges[n].x - edges[n - 1].x;
        const double dx2 = dx * dx;
        std::vector<cplx> next(dst.w.size());
        for (std::size_t q = 0; q < next.size(); ++q) {
            const double yq = dst.y[q];
            const double zq = dst.z[q];
            cplx acc{0.0, 0.0};
            for (std::size_t p = 0; p < field.size(); ++p) {
                const double dy = yq - src.y[p];
                const double dz = zq - src.z[p];
                const double r = std::sqrt(dx2 + dy * dy + dz * dz);
                acc += field[p] / r * unit_phasor(-k0 * r);
            }
            next[q] = acc * dst.w[q];
        }
        field.swap(next);
    }

    const ScreenGrid& last = grids[k - 1];
    const double lr = geom.d - edges[k - 1].x;
    const double lr2 = lr * lr;
    cplx acc{0.0, 0.0};
    for (std::size_t q = 0; q < field.size(); ++q) {
        const double r = std::sqrt(lr2 + last.y[q] * last.y[q] + last.z[q] * last.z[q]);
        acc += field[q] / r * unit_phasor(-k0 * r);
    }

    const double amp = geom.d / std::pow(geom.lambda, static_cast<double>(k));
    return j_power(k) * amp * unit_phasor(k0 * geom.d) * acc;
}

}  // namespace detail

/// Coupled obstruction integral over the screens of one subset, ordered by
/// increasing x. Refines phase-controlled tensor grids until the value moves
/// by less than spec.rel_tol; the returned err is the last refinement delta.
inline PsiResult psi_subset(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                            const QuadratureSpec& spec = {})
{
    const std::size_t k = edges.size();
    if (k == 0)
        throw validation_error("psi_subset: empty subset");
    if (k > 6)
        throw capability_error("psi_subset: subsets beyond six screens are intractable");
    for (const KnifeEdge& e : edges)
        if (!(e.width > 0.0) || !(e.z_hi > e.z_lo))
            return {cplx(0.0, 0.0), 0.0};  // zero-measure domain

    std::vector<double> xs;
    xs.reserve(k);
    for (const KnifeEdge& e : edges)
        xs.push_back(e.x);
    const LinkPartition part = partition(geom, xs);
    const double min_sep = degenerate_separation_factor * geom.lambda;
    for (std::size_t i = 1; i < k; ++i)
        if (part.segments[i] < min_sep)
            throw validation_error("psi_subset: degenerate screen separation (< lambda/10)");

    constexpr int order = 8;
    const double k0 = 2.0 * std::numbers::pi / geom.lambda;
    std::vector<int> panels_y(k), panels_z(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double y_abs = std::max(std::abs(edges[i].y_lo()), std::abs(edges[i].y_hi()));
        const double z_abs = std::max(std::abs(edges[i].z_lo), std::abs(edges[i].z_hi));
        const double y_left = i == 0 ? 0.0
                                     : std::max(std::abs(edges[i - 1].y_lo()), std::abs(edges[i - 1].y_hi()));
        const double z_left = i == 0 ? 0.0
                                     : std::max(std::abs(edges[i - 1].z_lo), std::abs(edges[i - 1].z_hi));
        const double y_right = i + 1 == k ? 0.0
                                          : std::max(std::abs(edges[i + 1].y_lo()), std::abs(edges[i + 1].y_hi()));
        const double z_right = i + 1 == k ? 0.0
                                          : std::max(std::abs(edges[i + 1].z_lo), std::abs(edges[i + 1].z_hi));
        const double seg_l = part.segments[i];
        const double seg_r = part.segments[i + 1];
        const double tv_y = k0 * (detail::leg_phase_var(seg_l, y_abs + y_left) +
                                  detail::leg_phase_var(seg_r, y_abs + y_right));
        const double tv_z = k0 * (detail::leg_phase_var(seg_l, z_abs + z_left) +
                                  detail::leg_phase_var(seg_r, z_abs + z_right));
        panels_y[i] = detail::phase_panels(tv_y, spec, order);
        panels_z[i] = detail::phase_panels(tv_z, spec, order);
    }

    auto evaluate = [&](int mult, int gauss_order) {
        std::vector<detail::ScreenGrid> grids;
        grids.reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            grids.push_back(detail::make_screen_grid(edges[i], panels_y[i] * mult,
                                                     panels_z[i] * mult, gauss_order));
        return detail::chain_psi(geom, edges, grids);
    };

    cplx prev{0.0, 0.0};
    bool have_prev = false;
    for (int level = 0;; ++level) {
        const int mult = 1 << level;
        int worst = 0;
        for (std::size_t i = 0; i < k; ++i)
            worst = std::max({worst, panels_y[i] * mult, panels_z[i] * mult});
        if (worst > spec.max_panels_per_dim)
            throw convergence_error("psi_subset: no convergence within the panel budget");

        const cplx value = evaluate(mult, order);
        if (have_prev) {
            const double delta = std::abs(value - prev);
            if (delta <= spec.rel_tol * std::max(1.0, std::abs(value)))
                return {value, delta};
        }
        // Embedded lower-order companion on the same panels; its error
        // dominates the order-8 error once the panels resolve the phase,
        // so the difference is a conservative estimate at a fraction of
        // the cost of another grid refinement.
        const cplx companion = evaluate(mult, order - 1);
        const double delta = std::abs(value - companion);
        if (delta <= spec.rel_tol * std::max(1.0, std::abs(value)))
            return {value, delta};
        prev = value;
        have_prev = true;
    }
}

/// E/E0 for a single absorbing screen:
/// 1 - j d/lambda * integral over the screen of exp(-j k0 (r1+r2-d))/(r1 r2) dS
/// with r1, r2 the exact 3D distances from TX and RX to the surface point.
inline FieldRatio field_ratio_single(const ScenarioGeometry& geom, const KnifeEdge& edge,
                                     const QuadratureSpec& spec = {})
{
    const PsiResult psi = psi_subset(geom, std::span<const KnifeEdge>(&edge, 1), spec);
    return {1.0 - psi.value, psi.err};
}

namespace detail {

// Inclusion-exclusion over all nonempty screen subsets:
//   E(T)/E0 = (-1)^|T| * [ sum_{U proper subset of T} (-1)^{|U|+1} E(U)/E0 + Psi(T) ]
// with E(empty)/E0 = 1. Masks are evaluated in increasing numeric order,
// which visits every subset before its supersets.
template <typename PsiFn>
inline FieldRatio subset_recursion(std::size_t n, PsiFn&& psi_of_mask)
{
    const std::uint32_t full = (1u << n) - 1u;
    std::vector<cplx> ratio(full + 1u);
    ratio[0] = cplx(1.0, 0.0);
    double err_total = 0.0;
    for (std::uint32_t mask = 1; mask <= full; ++mask) {
        const PsiResult psi = psi_of_mask(mask);
        err_total += psi.err;
        cplx acc = psi.value;
        for (std::uint32_t sub = (mask - 1u) & mask;; sub = (sub - 1u) & mask) {
            acc += (std::popcount(sub) % 2 == 1 ? 1.0 : -1.0) * ratio[sub];
            if (sub == 0)
                break;
        }
        ratio[mask] = (std::popcount(mask) % 2 == 1 ? -1.0 : 1.0) * acc;
    }
    return {ratio[full], err_total};
}

template <typename PsiSubsetFn>
inline FieldRatio multi_body_ratio(std::span<const KnifeEdge> edges, PsiSubsetFn&& psi_fn)
{
    const std::size_t n = edges.size();
    for (std::size_t i = 1; i < n; ++i)
        if (!(edges[i].x > edges[i - 1].x))
            throw validation_error("multi-body field ratio: screens must be strictly increasing in x");
    return subset_recursion(n, [&](std::uint32_t mask) {
        std::vector<KnifeEdge> subset;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i))
                subset.push_back(edges[i]);
        return psi_fn(std::span<const KnifeEdge>(subset));
    });
}

}  // namespace detail

/// E/E0 for N screens by the subset recursion over coupled obstruction
/// integrals; each subset uses its own partition of the link. Reduces to
/// field_ratio_single at N=1 and to 1 for an empty set.
inline FieldRatio field_ratio_multi(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                                    const QuadratureSpec& spec = {}, int n_cap = 3)
{
    if (edges.empty())
        return {cplx(1.0, 0.0), 0.0};
    if (static_cast<int>(edges.size()) > n_cap)
        throw capability_error("field_ratio_multi: body count exceeds the configured cap");
    return detail::multi_body_ratio(edges, [&](std::span<const KnifeEdge> subset) {
        return psi_subset(geom, subset, spec);
    });
}

}  // namespace kedfl

#endif
