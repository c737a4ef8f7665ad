#ifndef KEDFL_GAUSS_HPP
#define KEDFL_GAUSS_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

namespace kedfl::detail {

struct GaussRule {
    std::vector<double> node;    // on [-1, 1]
    std::vector<double> weight;
};

// Newton iteration on the Legendre recurrence; stable up to a few thousand
// nodes. Only the lower half is computed, the rest follows by symmetry.
inline GaussRule make_gauss_rule(int n)
{
    GaussRule rule;
    rule.node.resize(n);
    rule.weight.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15)
                break;
        }
        rule.node[i] = -z;
        rule.node[n - 1 - i] = z;
        const double w = 2.0 / ((1.0 - z * z) * pp * pp);
        rule.weight[i] = w;
        rule.weight[n - 1 - i] = w;
    }
    return rule;
}

inline const GaussRule& gauss_rule(int n)
{
    static std::map<int, GaussRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, make_gauss_rule(n)).first;
    return it->second;
}

struct Grid1D {
    std::vector<double> x;
    std::vector<double> w;
};

/// Composite Gauss-Legendre grid: `panels` equal panels of `order` nodes on [a, b].
inline Grid1D composite_gauss(double a, double b, int panels, int order)
{
    const GaussRule& rule = gauss_rule(order);
    Grid1D grid;
    grid.x.reserve(static_cast<std::size_t>(panels) * order);
    grid.w.reserve(static_cast<std::size_t>(panels) * order);
    const double dx = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * dx;
        const double mid = lo + 0.5 * dx;
        for (int i = 0; i < order; ++i) {
            grid.x.push_back(mid + 0.5 * dx * rule.node[i]);
            grid.w.push_back(0.5 * dx * rule.weight[i]);
        }
    }
    return grid;
}

/// Single-panel Gauss-Legendre grid of `n` nodes on [a, b].
inline Grid1D gauss_grid(double a, double b, int n)
{
    const GaussRule& rule = gauss_rule(n);
    Grid1D grid;
    grid.x.resize(n);
    grid.w.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        grid.x[i] = mid + half * rule.node[i];
        grid.w[i] = half * rule.weight[i];
    }
    return grid;
}

}  // namespace kedfl::detail

#endif
