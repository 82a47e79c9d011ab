#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/ordinal.hpp"

namespace chplane {

struct PlanePoint {
    double h = 0.0;
    double c = 0.0;
};

/// Minimum and maximum complexity curves sampled on a shared uniform h grid.
struct BoundaryCurves {
    std::size_t n = 0;
    std::vector<PlanePoint> lower;
    std::vector<PlanePoint> upper;
};

namespace detail {

// A distribution given as (probability, multiplicity) groups.
struct Group {
    double p;
    double count;
};

inline ComplexityEntropy grouped_complexity_entropy(std::size_t n, std::initializer_list<Group> groups) {
    const auto nd = static_cast<double>(n);
    const double u = 1.0 / nd;
    double s_p = 0.0;
    double s_mix = 0.0;
    double covered = 0.0;
    for (const auto& g : groups) {
        if (g.count <= 0.0) continue;
        covered += g.count;
        if (g.p > 0.0) s_p -= g.count * g.p * std::log(g.p);
        const double m = 0.5 * (g.p + u);
        s_mix -= g.count * m * std::log(m);
    }
    // States not listed carry probability zero.
    const double rest = nd - covered;
    if (rest > 0.0) s_mix -= rest * 0.5 * u * std::log(0.5 * u);
    const double h = std::clamp(s_p / std::log(nd), 0.0, 1.0);
    const double js = std::max(0.0, s_mix - 0.5 * s_p - 0.5 * std::log(nd));
    return {h, js * h / max_js_divergence(n)};
}

// Lower family: one state at p in [1/n, 1], the other n-1 equal.
inline ComplexityEntropy lower_family(std::size_t n, double p) {
    const auto nd = static_cast<double>(n);
    return grouped_complexity_entropy(n, {{p, 1.0}, {(1.0 - p) / (nd - 1.0), nd - 1.0}});
}

// Upper family m: m zero states, one state at p in [0, 1/(n-m)], the
// remaining n-m-1 equal.
inline ComplexityEntropy upper_family(std::size_t n, std::size_t m, double p) {
    const auto free = static_cast<double>(n - m - 1);
    return grouped_complexity_entropy(n, {{p, 1.0}, {(1.0 - p) / free, free}});
}

// Bisection on a monotone map p -> h over [lo, hi].
template <typename Family>
double invert_entropy(Family&& family, double lo, double hi, double target, bool increasing) {
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double h = family(mid).h;
        if ((h < target) == increasing) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Minimum statistical complexity attainable at normalized entropy h.
inline double lower_complexity_at(std::size_t n, double h) {
    if (n < 2) throw InvalidArgument("n must be >= 2");
    h = std::clamp(h, 0.0, 1.0);
    if (h <= 0.0 || h >= 1.0) return 0.0;
    const auto family = [n](double p) { return detail::lower_family(n, p); };
    const double p = detail::invert_entropy(family, 1.0 / static_cast<double>(n), 1.0, h, false);
    return family(p).c;
}

/// Maximum statistical complexity attainable at normalized entropy h.
inline double upper_complexity_at(std::size_t n, double h) {
    if (n < 2) throw InvalidArgument("n must be >= 2");
    h = std::clamp(h, 0.0, 1.0);
    if (h <= 0.0 || h >= 1.0) return 0.0;
    const double log_n = std::log(static_cast<double>(n));
    // Family m spans h in [ln(n-m-1), ln(n-m)] / ln n.
    std::size_t m = 0;
    while (m + 2 < n && std::log(static_cast<double>(n - m - 1)) / log_n >= h) ++m;
    const auto family = [n, m](double p) { return detail::upper_family(n, m, p); };
    const double p = detail::invert_entropy(family, 0.0, 1.0 / static_cast<double>(n - m), h, true);
    return family(p).c;
}

/// Sample both boundary curves at `resolution` evenly spaced h values in [0, 1].
inline BoundaryCurves complexity_bounds(std::size_t n, std::size_t resolution) {
    if (n < 2) throw InvalidArgument("n must be >= 2");
    if (resolution < 10) throw InvalidArgument("resolution must be >= 10");
    BoundaryCurves b;
    b.n = n;
    b.lower.reserve(resolution);
    b.upper.reserve(resolution);
    for (std::size_t i = 0; i < resolution; ++i) {
        const double h = static_cast<double>(i) / static_cast<double>(resolution - 1);
        b.lower.push_back({h, lower_complexity_at(n, h)});
        b.upper.push_back({h, upper_complexity_at(n, h)});
    }
    return b;
}

}  // namespace chplane
