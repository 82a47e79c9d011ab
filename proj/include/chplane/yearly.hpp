#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chplane/error.hpp"
#include "chplane/ordinal.hpp"

namespace chplane {

struct Moments {
    std::size_t n = 0;
    double mean = 0;
    double variance = 0;           // unbiased; 0 for a single value
    std::optional<double> skewness;  // adjusted Fisher-Pearson, n >= 3
};

inline Moments moments(std::span<const double> x) {
    if (x.empty()) throw InvalidArgument("moments of an empty sample");
    Moments m;
    m.n = x.size();
    const auto n = static_cast<double>(m.n);
    double s = 0;
    for (double v : x) s += v;
    m.mean = s / n;
    double m2 = 0, m3 = 0;
    for (double v : x) {
        const double d = v - m.mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    if (m.n > 1) m.variance = m2 / (n - 1);
    m2 /= n;
    m3 /= n;
    if (m.n >= 3 && m2 > 0) m.skewness = std::sqrt(n * (n - 1)) / (n - 2) * m3 / std::pow(m2, 1.5);
    return m;
}

struct YearlyStats {
    std::string group;
    int year = 0;
    std::size_t count = 0;
    double mean_h = 0, mean_c = 0;
    double var_h = 0, var_c = 0;
    std::optional<double> skew_h, skew_c;
};

/// Per (group, year) moments of H and C, ordered by group then year.
inline std::vector<YearlyStats> yearly_stats(std::span<const CHPoint> points) {
    std::map<std::pair<std::string, int>, std::pair<std::vector<double>, std::vector<double>>> cells;
    for (const auto& p : points) {
        auto& [h, c] = cells[{p.group, p.year}];
        h.push_back(p.h);
        c.push_back(p.c);
    }
    std::vector<YearlyStats> out;
    for (const auto& [key, hc] : cells) {
        const auto mh = moments(hc.first);
        const auto mc = moments(hc.second);
        out.push_back({key.first, key.second, mh.n, mh.mean, mc.mean, mh.variance, mc.variance, mh.skewness, mc.skewness});
    }
    return out;
}

struct Ellipse {
    double center_h = 0, center_c = 0;
    double a = 0, b = 0;  // semi-axes, a >= b
    double angle = 0;     // major axis direction in the (h, c) plane, (-pi/2, pi/2]
};

inline double chi2_2dof_quantile(double level) {
    if (!(level > 0 && level < 1)) throw InvalidArgument("confidence level must lie in (0, 1)");
    return -2.0 * std::log1p(-level);
}

/// Covariance ellipse of (h, c) points scaled to the chi-square(2) quantile.
/// With of_mean the covariance is divided by n (ellipse of the mean).
inline Ellipse confidence_ellipse(std::span<const double> h, std::span<const double> c, double level = 0.95,
                                  bool of_mean = false) {
    if (h.size() != c.size()) throw LengthMismatch("h and c differ in length");
    if (h.size() < 3) throw DegenerateCovariance("confidence ellipse needs at least 3 points");
    const auto n = static_cast<double>(h.size());
    Ellipse e;
    for (std::size_t i = 0; i < h.size(); ++i) {
        e.center_h += h[i];
        e.center_c += c[i];
    }
    e.center_h /= n;
    e.center_c /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = h[i] - e.center_h, dy = c[i] - e.center_c;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    const double div = (n - 1) * (of_mean ? n : 1.0);
    sxx /= div;
    syy /= div;
    sxy /= div;
    const double mid = 0.5 * (sxx + syy);
    const double rad = std::hypot(0.5 * (sxx - syy), sxy);
    const double l1 = mid + rad, l2 = mid - rad;
    if (!(l1 > 0) || !(l2 > 1e-12 * l1)) throw DegenerateCovariance("points are collinear or identical");
    const double q = chi2_2dof_quantile(level);
    e.a = std::sqrt(l1 * q);
    e.b = std::sqrt(l2 * q);
    e.angle = 0.5 * std::atan2(2 * sxy, sxx - syy);
    if (e.angle <= -std::numbers::pi / 2) e.angle += std::numbers::pi;
    return e;
}

inline Ellipse confidence_ellipse(std::span<const CHPoint> points, double level = 0.95, bool of_mean = false) {
    std::vector<double> h, c;
    for (const auto& p : points) {
        h.push_back(p.h);
        c.push_back(p.c);
    }
    return confidence_ellipse(h, c, level, of_mean);
}

struct TrajectoryPoint {
    int year = 0;
    double mean_h = 0;
    double mean_c = 0;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;  // ascending years
    double delta_h = 0;                   // last minus first
    double delta_c = 0;
};

inline Trajectory trajectory(std::span<const YearlyStats> stats) {
    if (stats.size() < 2) throw TooFewYears("trajectory needs at least 2 years");
    Trajectory t;
    for (const auto& s : stats) t.points.push_back({s.year, s.mean_h, s.mean_c});
    std::sort(t.points.begin(), t.points.end(), [](const auto& x, const auto& y) { return x.year < y.year; });
    for (std::size_t i = 1; i < t.points.size(); ++i)
        if (t.points[i].year == t.points[i - 1].year) throw InvalidArgument("duplicate year in trajectory");
    t.delta_h = t.points.back().mean_h - t.points.front().mean_h;
    t.delta_c = t.points.back().mean_c - t.points.front().mean_c;
    return t;
}

}  // namespace chplane
