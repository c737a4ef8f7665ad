#ifndef KEDFL_DIFFRACTION_PARAXIAL_HPP
#define KEDFL_DIFFRACTION_PARAXIAL_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "kedfl/diffraction_full.hpp"
#include "kedfl/fresnel.hpp"
#include "kedfl/gauss.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/types.hpp"

namespace kedfl {

// Accuracy bound for closed-form paraxial results assembled from a handful
// of Fresnel integral evaluations.
inline constexpr double fresnel_err_bound = 1e-8;

/// Paraxial E/E0 for one screen, separable closed form:
///   1 - (j/2) * int exp(-j pi/2 u^2) du * int exp(-j pi/2 v^2) dv
/// over u in sqrt(2)/R1 * [y_lo, y_hi] and v in sqrt(2)/R1 * [z_lo, z_hi].
/// Infinite screen bounds are admitted (classic knife-edge limits).
inline FieldRatio field_ratio_single_paraxial(const ScenarioGeometry& geom, const KnifeEdge& edge)
{
    const double r1 = fresnel_radius(geom, edge.x);
    const double s = std::numbers::sqrt2 / r1;
    const cplx u = fresnel_segment(s * edge.y_lo(), s * edge.y_hi());
    const cplx v = fresnel_segment(s * edge.z_lo, s * edge.z_hi);
    const cplx value = 1.0 - cplx(0.0, 0.5) * u * v;
    return {value, fresnel_err_bound};
}

namespace detail {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct ParaxialDomain {
    LinkPartition part;
    ParaxialConstants constants;
    double prefactor = 1.0;            // d * prod(interior) / prod(consecutive sums)
    std::vector<Interval> u;           // width direction, scaled by sqrt(2)/R_n
    std::vector<Interval> v;           // height direction
};

inline ParaxialDomain make_paraxial_domain(const ScenarioGeometry& geom,
                                           std::span<const KnifeEdge> edges)
{
    ParaxialDomain dom;
    std::vector<double> xs;
    xs.reserve(edges.size());
    for (const KnifeEdge& e : edges)
        xs.push_back(e.x);
    dom.part = partition(geom, xs);

    const double min_sep = degenerate_separation_factor * geom.lambda;
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (dom.part.segments[i] < min_sep)
            throw validation_error("paraxial subset: degenerate screen separation (< lambda/10)");

    dom.constants = generalized_radii_and_couplings(dom.part, geom.lambda);

    double num = geom.d;
    for (std::size_t i = 1; i + 1 < dom.part.segments.size(); ++i)
        num *= dom.part.segments[i];
    double den = 1.0;
    for (std::size_t i = 0; i + 1 < dom.part.segments.size(); ++i)
        den *= dom.part.segments[i] + dom.part.segments[i + 1];
    dom.prefactor = num / den;

    for (std::size_t i = 0; i < edges.size(); ++i) {
        const double s = std::numbers::sqrt2 / dom.constants.radius[i];
        dom.u.push_back({s * edges[i].y_lo(), s * edges[i].y_hi()});
        dom.v.push_back({s * edges[i].z_lo, s * edges[i].z_hi});
    }
    return dom;
}

// k-dimensional quadratic-phase integral with tridiagonal coupling,
//   int ... int exp(-j pi/2 (sum u_n^2 - 2 sum alpha_n u_n u_{n+1})) du,
// evaluated as a chain of 1-dim quadratures propagated screen to screen.
inline cplx coupled_phase_chain(const std::vector<Interval>& intervals,
                                const std::vector<double>& alpha, int nodes)
{
    constexpr double half_pi = std::numbers::pi / 2.0;
    const std::size_t k = intervals.size();

    Grid1D grid = gauss_grid(intervals[0].lo, intervals[0].hi, nodes);
    std::vector<cplx> field(grid.x.size());
    for (std::size_t p = 0; p < field.size(); ++p)
        field[p] = grid.w[p] * unit_phasor(-half_pi * grid.x[p] * grid.x[p]);

    for (std::size_t n = 1; n < k; ++n) {
        Grid1D next_grid = gauss_grid(intervals[n].lo, intervals[n].hi, nodes);
        std::vector<cplx> next(next_grid.x.size());
        const double coupling = std::numbers::pi * alpha[n - 1];
        for (std::size_t q = 0; q < next.size(); ++q) {
            const double uq = next_grid.x[q];
            cplx acc{0.0, 0.0};
            for (std::size_t p = 0; p < field.size(); ++p)
                acc += field[p] * unit_phasor(coupling * grid.x[p] * uq);
            next[q] = acc * next_grid.w[q] * unit_phasor(-half_pi * uq * uq);
        }
        field.swap(next);
        grid = std::move(next_grid);
    }

    cplx total{0.0, 0.0};
    for (const cplx& f : field)
        total += f;
    return total;
}

inline bool finite_interval(const Interval& iv)
{
    return std::isfinite(iv.lo) && std::isfinite(iv.hi);
}

}  // namespace detail

/// Paraxial coupled obstruction integral for one subset:
///   (j/2)^k * prefactor * I_u * I_v
/// with I_u, I_v the tridiagonally coupled quadratic-phase integrals over the
/// transformed screen rectangles. k = 1 is closed-form (Fresnel integrals);
/// larger subsets use the quadrature chain with node doubling from 129.
inline PsiResult psi_tilde_subset(const ScenarioGeometry& geom, std::span<const KnifeEdge> edges,
                                  const QuadratureSpec& spec = {})
{
    const std::size_t k = edges.size();
    if (k == 0)
        throw validation_error("psi_tilde_subset: empty subset");
    for (const KnifeEdge& e : edges)
        if (!(e.width > 0.0) || !(e.z_hi > e.z_lo))
            return {cplx(0.0, 0.0), 0.0};

    const detail::ParaxialDomain dom = detail::make_paraxial_domain(geom, edges);

    if (k == 1) {
        const cplx iu = fresnel_segment(dom.u[0].lo, dom.u[0].hi);
        const cplx iv = fresnel_segment(dom.v[0].lo, dom.v[0].hi);
        return {cplx(0.0, 0.5) * dom.prefactor * iu * iv, fresnel_err_bound};
    }

    for (std::size_t i = 0; i < k; ++i)
        if (!detail::finite_interval(dom.u[i]) || !detail::finite_interval(dom.v[i]))
            throw capability_error("psi_tilde_subset: coupled subsets require finite screens");

    const cplx scale = detail::j_power(k) / std::pow(2.0, static_cast<double>(k)) * dom.prefactor;
    const int max_nodes = std::max(129, 2 * spec.max_panels_per_dim);
    cplx prev{0.0, 0.0};
    for (int nodes = 129;; nodes *= 2) {
        if (nodes > max_nodes)
            throw convergence_error("psi_tilde_subset: no convergence within the node budget");
        const cplx iu = detail::coupled_phase_chain(dom.u, dom.constants.alpha, nodes);
        const cplx iv = detail::coupled_phase_chain(dom.v, dom.constants.alpha, nodes);
        const cplx value = scale * iu * iv;
        if (nodes > 129) {
            const double delta = std::abs(value - prev);
            if (delta <= spec.rel_tol * std::max(1.0, std::abs(value)))
                return {value, delta};
        }
        prev = value;
    }
}

/// Paraxial E/E0 for N screens; same subset recursion as the full engine but
/// with the separable paraxial integrals, practical up to ~6 bodies.
inline FieldRatio field_ratio_multi_paraxial(const ScenarioGeometry& geom,
                                             std::span<const KnifeEdge> edges,
                                             const QuadratureSpec& spec = {}, int n_cap = 6)
{
    if (edges.empty())
        return {cplx(1.0, 0.0), 0.0};
    if (static_cast<int>(edges.size()) > n_cap)
        throw capability_error("field_ratio_multi_paraxial: body count exceeds the configured cap");
    return detail::multi_body_ratio(edges, [&](std::span<const KnifeEdge> subset) {
        return psi_tilde_subset(geom, subset, spec);
    });
}

namespace detail {

// Direct tensor-product evaluation of the dual-body coupled integral; a
// second algebraic route used to cross-check the chain organization.
inline cplx coupled_phase_tensor_pair(const Interval& i1, const Interval& i2, double alpha,
                                      int nodes)
{
    constexpr double half_pi = std::numbers::pi / 2.0;
    const Grid1D g1 = gauss_grid(i1.lo, i1.hi, nodes);
    const Grid1D g2 = gauss_grid(i2.lo, i2.hi, nodes);
    cplx total{0.0, 0.0};
    for (std::size_t p = 0; p < g1.x.size(); ++p) {
        const double u1 = g1.x[p];
        cplx row{0.0, 0.0};
        for (std::size_t q = 0; q < g2.x.size(); ++q) {
            const double u2 = g2.x[q];
            const double phase = -half_pi * (u1 * u1 + u2 * u2 - 2.0 * alpha * u1 * u2);
            row += g2.w[q] * unit_phasor(phase);
        }
        total += g1.w[p] * row;
    }
    return total;
}

}  // namespace detail

/// Analytically organized dual-body paraxial ratio:
///   E(1,2)/E0 = -1 + E(1)/E0 + E(2)/E0 - (1/4) * prefactor * I_u * I_v
/// with the single-body terms in closed form and the mixed integrals as
/// direct tensor products.
inline FieldRatio field_ratio_dual_paraxial(const ScenarioGeometry& geom, const KnifeEdge& first,
                                            const KnifeEdge& second, int nodes = 513)
{
    const KnifeEdge pair[2] = {first, second};
    const FieldRatio r1 = field_ratio_single_paraxial(geom, first);
    const FieldRatio r2 = field_ratio_single_paraxial(geom, second);

    cplx mixed{0.0, 0.0};
    if (first.width > 0.0 && second.width > 0.0 && first.z_hi > first.z_lo &&
        second.z_hi > second.z_lo) {
        const detail::ParaxialDomain dom =
            detail::make_paraxial_domain(geom, std::span<const KnifeEdge>(pair, 2));
        const double alpha = dom.constants.alpha[0];
        const cplx iu = detail::coupled_phase_tensor_pair(dom.u[0], dom.u[1], alpha, nodes);
        const cplx iv = detail::coupled_phase_tensor_pair(dom.v[0], dom.v[1], alpha, nodes);
        mixed = -0.25 * dom.prefactor * iu * iv;
    }
    const cplx value = -1.0 + r1.value + r2.value + mixed;
    return {value, r1.err_estimate + r2.err_estimate};
}

}  // namespace kedfl

#endif
