#ifndef KEDFL_CALIBRATION_HPP
#define KEDFL_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "kedfl/diffraction_full.hpp"
#include "kedfl/diffraction_paraxial.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/parallel.hpp"
#include "kedfl/statistical.hpp"
#include "kedfl/types.hpp"

namespace kedfl {

/// One landmark: known body placements plus the measured RSS statistics.
struct LandmarkMeasurement {
    std::vector<std::pair<double, double>> positions;  // (x, y) per body, m
    double rss_mean_dbm = 0.0;
    double rss_var_db2 = 0.0;
    int samples = 0;  // optional, informational
};

struct MeasurementSet {
    std::vector<LandmarkMeasurement> landmarks;
    double mu0_dbm = 0.0;     // empty-scene reference mean
    double sigma0_sq = 0.0;   // empty-scene reference variance
};

struct SizeBox {
    double c_min = 0.05, c_max = 1.0;  // width bounds, m
    double h_min = 0.5, h_max = 2.2;   // height bounds, m
};

struct CalibrationOptions {
    SizeBox box;
    int max_iterations = 200;      // total budget across all descents
    double fd_step = 0.01;         // forward-difference step, 1 cm
    double ssr_tol = 1e-12;        // residual sum of squares considered zero
    double ssr_rel_change = 1e-10; // relative improvement considered converged
    double gradient_floor = 1e-9;  // below this the landmarks carry no signal
    // The attenuation surface ripples along the height coordinate with
    // basins only centimeters wide, so a local descent from the nominal
    // sizes alone can trap. A deterministic shared-size search locates the
    // basin first: the width direction is smooth and is scanned coarsely at
    // a few heights, then the height is scanned densely at the best width.
    // A per-body descent polishes from there. The caller's initialization
    // always runs first and wins ties.
    bool global_search = true;
    double scan_c_step = 0.02;
    double scan_h_step = 0.01;
    // Scans only locate basins, so they may run on coarser panels than the
    // descents; the fitted residuals always use the caller's spec.
    double scan_phase_step = std::numbers::pi / 2.0;
};

struct CalibrationResult {
    std::vector<double> widths;   // fitted c_n, m
    std::vector<double> heights;  // fitted h_n, m
    double residual_ss = 0.0;     // dB^2
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline double predicted_delta_mu(const ScenarioGeometry& geom,
                                 const std::vector<std::pair<double, double>>& positions,
                                 std::span<const double> widths, std::span<const double> heights,
                                 Engine engine, const QuadratureSpec& spec, double delta_mu_C)
{
    struct Placed {
        double x, y, c, h;
    };
    // Same sensing-region gate as the statistical layer: bodies outside it
    // are background and contribute nothing.
    std::vector<Placed> placed;
    for (std::size_t n = 0; n < positions.size(); ++n)
        if (in_sensing_region(geom, positions[n].first, positions[n].second))
            placed.push_back({positions[n].first, positions[n].second, widths[n], heights[n]});
    std::sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) { return a.x < b.x; });

    std::vector<KnifeEdge> edges;
    edges.reserve(placed.size());
    for (const Placed& p : placed)
        edges.push_back({p.x, p.y, p.c, -geom.H, p.h - geom.H});
    if (edges.empty())
        return delta_mu_C;
    return delta_mu_C - attenuation_db(field_ratio_for(geom, edges, engine, spec));
}

// Gaussian elimination with partial pivoting; systems here are tiny
// (2 parameters per body). Zero-gradient parameters are pinned to zero step.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t j = 0; j < n; ++j)
        if (std::abs(a[j * n + j]) < 1e-300) {
            for (std::size_t k = 0; k < n; ++k) {
                a[j * n + k] = 0.0;
                a[k * n + j] = 0.0;
            }
            a[j * n + j] = 1.0;
            b[j] = 0.0;
        }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(a[row * n + col]) > std::abs(a[pivot * n + col]))
                pivot = row;
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k)
                std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        const double diag = a[col * n + col];
        if (std::abs(diag) < 1e-300)
            throw convergence_error("calibrate: singular normal equations");
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = a[row * n + col] / diag;
            if (f == 0.0)
                continue;
            for (std::size_t k = col; k < n; ++k)
                a[row * n + k] -= f * a[col * n + k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t row = n; row-- > 0;) {
        double s = b[row];
        for (std::size_t k = row + 1; k < n; ++k)
            s -= a[row * n + k] * x[k];
        x[row] = s / a[row * n + row];
    }
    return x;
}

}  // namespace detail

/// Per-landmark residuals (measured minus predicted mean increment), dB.
inline std::vector<double> residuals(const ScenarioGeometry& geom, const MeasurementSet& meas,
                                     std::span<const double> widths,
                                     std::span<const double> heights, Engine engine,
                                     const QuadratureSpec& spec = {}, double delta_mu_C = 0.0,
                                     int threads = 1)
{
    std::vector<double> out(meas.landmarks.size(), 0.0);
    run_indexed(out.size(), threads, [&](std::size_t l) {
        const LandmarkMeasurement& lm = meas.landmarks[l];
        const double measured = lm.rss_mean_dbm - meas.mu0_dbm;
        const double predicted = detail::predicted_delta_mu(geom, lm.positions, widths, heights,
                                                            engine, spec, delta_mu_C);
        out[l] = measured - predicted;
    });
    return out;
}

namespace detail {

struct LmContext {
    const ScenarioGeometry& geom;
    const MeasurementSet& meas;
    std::size_t nb;
    Engine engine;
    const QuadratureSpec& spec;
    const CalibrationOptions& opts;
    double delta_mu_C;
    int threads;
    bool shared = false;  // one (width, height) pair for all bodies

    std::size_t param_count() const { return shared ? 2 : 2 * nb; }

    void clamp(std::vector<double>& theta) const
    {
        const std::size_t groups = shared ? 1 : nb;
        for (std::size_t n = 0; n < groups; ++n) {
            theta[2 * n] = std::clamp(theta[2 * n], opts.box.c_min, opts.box.c_max);
            theta[2 * n + 1] = std::clamp(theta[2 * n + 1], opts.box.h_min, opts.box.h_max);
        }
    }

    std::vector<double> eval(const std::vector<double>& theta) const
    {
        std::vector<double> w(nb), h(nb);
        for (std::size_t n = 0; n < nb; ++n) {
            w[n] = shared ? theta[0] : theta[2 * n];
            h[n] = shared ? theta[1] : theta[2 * n + 1];
        }
        return residuals(geom, meas, w, h, engine, spec, delta_mu_C, threads);
    }
};

inline double sum_sq(const std::vector<double>& r)
{
    double s = 0.0;
    for (double v : r)
        s += v * v;
    return s;
}

struct DescentOutcome {
    std::vector<double> theta;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

// One damped Gauss-Newton descent from a single starting point. Consumes
// iterations from the shared budget.
inline DescentOutcome lm_descent(const LmContext& ctx, std::vector<double> theta, int& budget)
{
    const std::size_t np = ctx.param_count();
    ctx.clamp(theta);

    std::vector<double> resid = ctx.eval(theta);
    double ssr = sum_sq(resid);
    const std::size_t nl = resid.size();

    double damping = 1e-3;
    int iterations = 0;
    bool converged = ssr <= ctx.opts.ssr_tol;
    bool stalled = false;

    while (!converged && !stalled && budget > 0) {
        // Model Jacobian by forward differences, flipped at the box edge.
        std::vector<double> jac(nl * np, 0.0);  // d(predicted)/d(theta)
        double max_grad = 0.0;
        for (std::size_t j = 0; j < np; ++j) {
            const bool is_width = (j % 2 == 0);
            const double hi = is_width ? ctx.opts.box.c_max : ctx.opts.box.h_max;
            double step = ctx.opts.fd_step;
            if (theta[j] + step > hi)
                step = -ctx.opts.fd_step;
            std::vector<double> theta_p = theta;
            theta_p[j] += step;
            const std::vector<double> resid_p = ctx.eval(theta_p);
            for (std::size_t l = 0; l < nl; ++l) {
                // residual = measured - predicted, so d(predicted) = r - r_pert
                const double df = (resid[l] - resid_p[l]) / step;
                jac[l * np + j] = df;
                max_grad = std::max(max_grad, std::abs(df));
            }
        }
        if (max_grad < ctx.opts.gradient_floor)
            throw convergence_error("calibrate: no gradient signal from the landmarks");

        std::vector<double> jtj(np * np, 0.0), jtr(np, 0.0);
        for (std::size_t l = 0; l < nl; ++l)
            for (std::size_t j = 0; j < np; ++j) {
                jtr[j] += jac[l * np + j] * resid[l];
                for (std::size_t k = 0; k < np; ++k)
                    jtj[j * np + k] += jac[l * np + j] * jac[l * np + k];
            }

        bool accepted = false;
        while (!accepted && budget > 0) {
            ++iterations;
            --budget;
            std::vector<double> lhs = jtj;
            for (std::size_t j = 0; j < np; ++j)
                lhs[j * np + j] += damping * std::max(jtj[j * np + j], 1e-30);
            std::vector<double> delta = solve_dense(lhs, jtr);
            std::vector<double> theta_new = theta;
            for (std::size_t j = 0; j < np; ++j)
                theta_new[j] += delta[j];
            ctx.clamp(theta_new);

            const std::vector<double> resid_new = ctx.eval(theta_new);
            const double ssr_new = sum_sq(resid_new);
            if (ssr_new < ssr) {
                const double improvement = ssr - ssr_new;
                theta = std::move(theta_new);
                resid = resid_new;
                ssr = ssr_new;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (ssr <= ctx.opts.ssr_tol ||
                    improvement <= ctx.opts.ssr_rel_change * std::max(1.0, ssr))
                    converged = true;
            } else {
                damping *= 4.0;
                if (damping > 1e14) {
                    // No direction improves: a box corner or a flat spot.
                    converged = ssr <= ctx.opts.ssr_tol;
                    stalled = !converged;
                    break;
                }
            }
        }
    }

    return {std::move(theta), ssr, iterations, converged};
}

}  // namespace detail

/// Nonlinear least squares fit of the EM-equivalent (width, height) per body
/// to landmark mean-RSS measurements: trust-region (damped) Levenberg-
/// Marquardt with a forward finite-difference Jacobian and box-projected
/// steps. The caller's initialization runs first; a fixed lattice of coarse
/// shared-size starts covers the ripple-induced local minima, and the best
/// final residual wins. Fully deterministic.
inline CalibrationResult calibrate(const ScenarioGeometry& geom, const MeasurementSet& meas,
                                   std::span<const double> init_widths,
                                   std::span<const double> init_heights, Engine engine,
                                   const QuadratureSpec& spec = {},
                                   const CalibrationOptions& opts = {}, double delta_mu_C = 0.0,
                                   int threads = 1)
{
    if (meas.landmarks.empty())
        throw schema_error("calibrate: at least one landmark is required");
    const std::size_t nb = init_widths.size();
    if (nb == 0 || init_heights.size() != nb)
        throw schema_error("calibrate: initial widths/heights must be nonempty and same length");
    for (const LandmarkMeasurement& lm : meas.landmarks)
        if (lm.positions.size() != nb)
            throw schema_error("calibrate: landmark body count does not match the fitted bodies");

    const detail::LmContext full{geom, meas, nb, engine, spec, opts, delta_mu_C, threads, false};

    auto to_result = [&](const detail::DescentOutcome& run) {
        CalibrationResult result;
        result.widths.resize(nb);
        result.heights.resize(nb);
        for (std::size_t n = 0; n < nb; ++n) {
            result.widths[n] = run.theta[2 * n];
            result.heights[n] = run.theta[2 * n + 1];
        }
        result.residual_ss = run.ssr;
        result.iterations = run.iterations;
        result.converged = run.converged;
        return result;
    };

    std::vector<double> user_start(2 * nb);
    for (std::size_t n = 0; n < nb; ++n) {
        user_start[2 * n] = init_widths[n];
        user_start[2 * n + 1] = init_heights[n];
    }

    int budget = opts.max_iterations;
    detail::DescentOutcome best = detail::lm_descent(full, user_start, budget);
    int total_iterations = best.iterations;
    if ((best.converged && best.ssr <= opts.ssr_tol) || !opts.global_search) {
        best.iterations = total_iterations;
        return to_result(best);
    }

    // Scans evaluate the shared-size objective in parallel over grid points.
    const detail::LmContext shared{geom, meas, nb, engine, spec, opts, delta_mu_C, threads, true};
    QuadratureSpec scan_spec = spec;
    scan_spec.phase_step = std::max(spec.phase_step, opts.scan_phase_step);
    scan_spec.rel_tol = std::max(spec.rel_tol, 1e-3);
    const detail::LmContext shared_serial{geom,  meas,       nb, engine, scan_spec,
                                          opts,  delta_mu_C, 1,  true};
    auto scan = [&](const std::vector<std::pair<double, double>>& grid) {
        std::vector<double> ssr(grid.size());
        run_indexed(grid.size(), threads, [&](std::size_t i) {
            std::vector<double> theta{grid[i].first, grid[i].second};
            shared_serial.clamp(theta);
            ssr[i] = detail::sum_sq(shared_serial.eval(theta));
        });
        return ssr;
    };

    // Width is the smooth coordinate: coarse scan across a few heights,
    // keeping the best width of every height row (a single row can alias).
    std::vector<std::pair<double, double>> c_grid;
    const std::vector<double> h_rows = {0.9, 1.25, 1.6, 1.95};
    std::size_t row_len = 0;
    for (double h_row : h_rows) {
        const double h = std::clamp(h_row, opts.box.h_min, opts.box.h_max);
        row_len = 0;
        for (double c = opts.box.c_min; c <= opts.box.c_max + 1e-12; c += opts.scan_c_step) {
            c_grid.emplace_back(c, h);
            ++row_len;
        }
    }
    const std::vector<double> c_ssr = scan(c_grid);
    std::vector<double> c_candidates;
    for (std::size_t row = 0; row < h_rows.size(); ++row) {
        std::size_t arg = row * row_len;
        for (std::size_t i = row * row_len; i < (row + 1) * row_len; ++i)
            if (c_ssr[i] < c_ssr[arg])
                arg = i;
        const double c = c_grid[arg].first;
        const bool dup = std::any_of(c_candidates.begin(), c_candidates.end(), [&](double v) {
            return std::abs(v - c) < 0.5 * opts.scan_c_step;
        });
        if (!dup)
            c_candidates.push_back(c);
    }

    // Height ripples with narrow basins: dense scan at every candidate width.
    std::vector<std::pair<double, double>> h_grid;
    for (double c : c_candidates)
        for (double h = opts.box.h_min; h <= opts.box.h_max + 1e-12; h += opts.scan_h_step)
            h_grid.emplace_back(c, h);
    const std::vector<double> h_ssr = scan(h_grid);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < h_ssr.size(); ++i)
        if (h_ssr[i] < h_ssr[arg])
            arg = i;

    const detail::DescentOutcome stage =
        detail::lm_descent(shared, {h_grid[arg].first, h_grid[arg].second}, budget);
    total_iterations += stage.iterations;
    std::vector<double> expanded(2 * nb);
    for (std::size_t n = 0; n < nb; ++n) {
        expanded[2 * n] = stage.theta[0];
        expanded[2 * n + 1] = stage.theta[1];
    }
    detail::DescentOutcome polished = detail::lm_descent(full, expanded, budget);
    total_iterations += polished.iterations;
    if (polished.ssr < best.ssr)
        best = std::move(polished);
    best.iterations = total_iterations;
    return to_result(best);
}

}  // namespace kedfl

#endif
