#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "chplane/econometrics/ols.hpp"
#include "chplane/error.hpp"

namespace chplane::econ {

enum class Trend { none, constant, trend };

inline std::string_view trend_name(Trend t) {
    switch (t) {
        case Trend::none: return "none";
        case Trend::constant: return "constant";
        case Trend::trend: return "trend";
    }
    return "?";
}

struct AdfResult {
    double statistic = 0;
    int lags = 0;
    Trend trend = Trend::constant;
    bool gls = false;
    Eigen::Index nobs = 0;
    std::array<double, 3> critical{};  // 1%, 5%, 10%
    std::array<bool, 3> reject{};

    [[nodiscard]] bool reject_at(double level) const {
        if (level == 0.01) return reject[0];
        if (level == 0.05) return reject[1];
        if (level == 0.10) return reject[2];
        throw InvalidArgument("critical values exist for the 1%, 5% and 10% levels only");
    }
};

namespace adf_detail {

// MacKinnon (2010) response surfaces, one regressor: cv = b0 + b1/T + b2/T^2 + b3/T^3.
inline constexpr std::array<std::array<double, 4>, 3> tau_nc{{
    {-2.56574, -2.2358, -3.627, 0.0},
    {-1.94100, -0.2686, -3.365, 31.223},
    {-1.61682, 0.2656, -2.714, 25.364},
}};
inline constexpr std::array<std::array<double, 4>, 3> tau_c{{
    {-3.43035, -6.5393, -16.786, -79.433},
    {-2.86154, -2.8903, -4.234, -40.040},
    {-2.56677, -1.5384, -2.809, 0.0},
}};
inline constexpr std::array<std::array<double, 4>, 3> tau_ct{{
    {-3.95877, -9.0531, -28.428, -134.155},
    {-3.41049, -4.3904, -9.036, -45.374},
    {-3.12705, -2.5856, -3.925, -22.380},
}};
// Elliott-Rothenberg-Stock asymptotic values for the GLS-detrended linear-trend case.
inline constexpr std::array<double, 3> ers_trend{-3.48, -2.89, -2.57};

inline int deterministic_columns(Trend t) { return t == Trend::none ? 0 : (t == Trend::constant ? 1 : 2); }

struct Regression {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

/// Rows t = start..n-1 of dy_t on [y_{t-1}, dy_{t-1..t-lags}, deterministic].
/// `start` >= lags + 1 lets several lag orders share one sample.
inline Regression design(std::span<const double> s, int lags, Trend trend, int start) {
    const int n = static_cast<int>(s.size());
    const int rows = n - start;
    const int cols = 1 + lags + deterministic_columns(trend);
    Regression r{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (int t = start; t < n; ++t) {
        const int i = t - start;
        r.y(i) = s[t] - s[t - 1];
        r.x(i, 0) = s[t - 1];
        for (int l = 1; l <= lags; ++l) r.x(i, l) = s[t - l] - s[t - l - 1];
        if (trend != Trend::none) r.x(i, 1 + lags) = 1.0;
        if (trend == Trend::trend) r.x(i, 2 + lags) = static_cast<double>(t);
    }
    return r;
}

inline std::vector<double> gls_detrend(std::span<const double> s, Trend trend) {
    const auto n = static_cast<Eigen::Index>(s.size());
    const int kd = deterministic_columns(trend);
    const double cbar = trend == Trend::trend ? -13.5 : -7.0;
    const double alpha = 1.0 + cbar / static_cast<double>(n);
    Eigen::MatrixXd z(n, kd), zq(n, kd);
    Eigen::VectorXd yq(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        z(t, 0) = 1.0;
        if (kd == 2) z(t, 1) = static_cast<double>(t + 1);
    }
    yq(0) = s[0];
    zq.row(0) = z.row(0);
    for (Eigen::Index t = 1; t < n; ++t) {
        yq(t) = s[static_cast<std::size_t>(t)] - alpha * s[static_cast<std::size_t>(t - 1)];
        zq.row(t) = z.row(t) - alpha * z.row(t - 1);
    }
    const Eigen::VectorXd b = ols(zq, yq).beta;
    std::vector<double> out(s.begin(), s.end());
    for (Eigen::Index t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] -= z.row(t).dot(b);
    return out;
}

inline void check_series(std::span<const double> s) {
    for (double v : s)
        if (!std::isfinite(v)) throw InvalidArgument("series contains non-finite values");
    bool constant = true;
    for (double v : s) constant = constant && v == s[0];
    if (constant && !s.empty()) throw DegenerateVariance("series is constant");
}

inline int max_feasible_lags(std::size_t n, Trend trend) {
    return std::max(0, (static_cast<int>(n) - 3 - deterministic_columns(trend)) / 2);
}

}  // namespace adf_detail

/// Augmented Dickey-Fuller t-test on the lagged level. With `gls` the series
/// is first GLS-detrended (DF-GLS) and the test regression has no
/// deterministic terms.
inline AdfResult adf_test(std::span<const double> series, int lags, Trend trend = Trend::constant, bool gls = false) {
    using namespace adf_detail;
    if (lags < 0) throw InvalidArgument("lags must be non-negative");
    if (gls && trend == Trend::none) throw InvalidArgument("GLS detrending needs a constant or trend");
    if (static_cast<int>(series.size()) <= lags + 3) throw SeriesTooShort("series length must exceed lags + 3");
    check_series(series);
    std::vector<double> detrended;
    std::span<const double> s = series;
    if (gls) {
        detrended = gls_detrend(series, trend);
        s = detrended;
    }
    const Trend reg_trend = gls ? Trend::none : trend;
    const auto reg = design(s, lags, reg_trend, lags + 1);
    if (reg.x.rows() <= reg.x.cols()) throw SeriesTooShort("too few observations for the test regression");
    OlsFit f;
    try {
        f = ols(reg.x, reg.y);
    } catch (const SingularDesign&) {
        throw DegenerateVariance("test regression is singular");
    }
    if (!(f.se(0) > 0) || !std::isfinite(f.se(0))) throw DegenerateVariance("zero residual variance in test regression");

    AdfResult r;
    r.statistic = f.beta(0) / f.se(0);
    r.lags = lags;
    r.trend = trend;
    r.gls = gls;
    r.nobs = reg.x.rows();
    const double inv_t = 1.0 / static_cast<double>(r.nobs);
    const auto& table = (gls ? Trend::none : trend) == Trend::none ? tau_nc : (trend == Trend::constant ? tau_c : tau_ct);
    for (int i = 0; i < 3; ++i) {
        const auto& b = table[static_cast<std::size_t>(i)];
        r.critical[static_cast<std::size_t>(i)] = gls && trend == Trend::trend
                                                      ? ers_trend[static_cast<std::size_t>(i)]
                                                      : b[0] + inv_t * (b[1] + inv_t * (b[2] + inv_t * b[3]));
        r.reject[static_cast<std::size_t>(i)] = r.statistic < r.critical[static_cast<std::size_t>(i)];
    }
    return r;
}

/// Default maximum lag: floor(12 (n/100)^(1/4)), capped by what the sample supports.
inline int default_max_lags(std::size_t n, Trend trend = Trend::constant) {
    const int schwert = static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
    return std::min(schwert, adf_detail::max_feasible_lags(n, trend));
}

/// Lag order minimising AIC over 0..max_lags, all fitted on the common sample
/// that the largest order allows. Ties go to the shorter lag.
inline int select_lags_aic(std::span<const double> series, int max_lags, Trend trend = Trend::constant, bool gls = false) {
    using namespace adf_detail;
    if (max_lags < 0) throw InvalidArgument("max_lags must be non-negative");
    if (static_cast<int>(series.size()) <= max_lags + 3) throw SeriesTooShort("series length must exceed max_lags + 3");
    check_series(series);
    std::vector<double> detrended;
    std::span<const double> s = series;
    if (gls) {
        detrended = gls_detrend(series, trend);
        s = detrended;
    }
    const Trend reg_trend = gls ? Trend::none : trend;
    int best = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int l = 0; l <= max_lags; ++l) {
        const auto reg = design(s, l, reg_trend, max_lags + 1);
        if (reg.x.rows() <= reg.x.cols()) break;
        double ssr;
        try {
            ssr = ols(reg.x, reg.y).ssr;
        } catch (const SingularDesign&) {
            continue;
        }
        const auto n = static_cast<double>(reg.x.rows());
        const double aic = n * std::log(ssr / n) + 2.0 * static_cast<double>(reg.x.cols());
        if (aic < best_aic - 1e-12) {
            best_aic = aic;
            best = l;
        }
    }
    return best;
}

}  // namespace chplane::econ
