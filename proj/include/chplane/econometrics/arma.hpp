#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chplane/econometrics/ols.hpp"
#include "chplane/econometrics/optimize.hpp"
#include "chplane/error.hpp"
#include "chplane/rng.hpp"

namespace chplane::econ {

enum class Objective { exact, css };

struct RegressionSpec {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // may have zero columns
    int p = 0;
    int q = 0;
};

struct ArmaParams {
    Eigen::VectorXd beta;
    Eigen::VectorXd phi;
    Eigen::VectorXd theta;  // MA polynomial 1 + theta_1 L + ... + theta_q L^q
    double sigma2 = 1;
};

struct RegressionFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd phi;
    Eigen::VectorXd theta;
    double sigma2 = 0;
    // Both ordered (beta..., phi..., theta..., sigma2). `se` is the OPG sandwich.
    Eigen::VectorXd se;
    Eigen::VectorXd se_hessian;
    double loglik = 0;
    double loglik_start = 0;
    Eigen::Index nobs = 0;
    int iterations = 0;
    bool converged = false;
    bool degenerate_variance = false;
    Objective objective = Objective::exact;
    std::vector<std::string> warnings;

    [[nodiscard]] Eigen::Index param_count() const { return beta.size() + phi.size() + theta.size() + 1; }
};

struct FitOptions {
    Objective objective = Objective::exact;
    BfgsOptions bfgs{};
};

namespace arma_detail {

inline double spectral_radius(const Eigen::VectorXd& phi) {
    const auto p = phi.size();
    if (p == 0) return 0;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
    c.row(0) = phi.transpose();
    for (Eigen::Index i = 1; i < p; ++i) c(i, i - 1) = 1;
    return c.eigenvalues().cwiseAbs().maxCoeff();
}

/// Schur-Cohn step-down test: every partial autocorrelation strictly inside (-1, 1).
inline bool stationary(Eigen::VectorXd a) {
    for (Eigen::Index k = a.size() - 1; k >= 0; --k) {
        const double r = a(k);
        if (!(std::abs(r) < 1)) return false;
        Eigen::VectorXd next = a.head(k);
        for (Eigen::Index j = 0; j < k; ++j) next(j) = (a(j) + r * a(k - 1 - j)) / (1 - r * r);
        a = next;
    }
    return true;
}

/// Partial autocorrelations -> AR coefficients (Durbin-Levinson).
inline Eigen::VectorXd pacf_to_ar(const Eigen::VectorXd& r) {
    const auto p = r.size();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd prev(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        prev = a;
        a(k) = r(k);
        for (Eigen::Index j = 0; j < k; ++j) a(j) = prev(j) - r(k) * prev(k - 1 - j);
    }
    return a;
}

inline Eigen::VectorXd ar_to_pacf(Eigen::VectorXd a) {
    const auto p = a.size();
    Eigen::VectorXd r(p);
    for (Eigen::Index k = p - 1; k >= 0; --k) {
        r(k) = a(k);
        const double d = 1 - r(k) * r(k);
        Eigen::VectorXd next = a;
        for (Eigen::Index j = 0; j < k; ++j) next(j) = (a(j) + r(k) * a(k - 1 - j)) / d;
        a = next;
    }
    return r;
}

constexpr double max_partial = 0.9999;

inline Eigen::VectorXd constrain(const Eigen::VectorXd& u) {
    return pacf_to_ar(u.array().tanh().cwiseMax(-max_partial).cwiseMin(max_partial).matrix());
}

inline Eigen::VectorXd unconstrain(const Eigen::VectorXd& a) {
    return ar_to_pacf(a).array().cwiseMax(-max_partial).cwiseMin(max_partial).atanh().matrix();
}

/// Shrinks AR-type coefficients until stationary: a_i -> a_i * 0.9^i pushes
/// every root outward by 1/0.9.
inline Eigen::VectorXd shrink_to_stationary(Eigen::VectorXd a) {
    for (int it = 0; it < 400 && a.size() && !stationary(a); ++it)
        for (Eigen::Index i = 0; i < a.size(); ++i) a(i) *= std::pow(0.9, static_cast<double>(i + 1));
    return a;
}

struct Filtered {
    Eigen::MatrixXd v;  // innovations, one column per input column
    Eigen::VectorXd f;  // innovation variances in units of sigma2
    Eigen::Index first = 0;
};

/// Runs the ARMA innovation filter on every column of `d`. The map from data
/// to innovations is linear, so regressors can be filtered alongside y.
inline Filtered filter(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta, const Eigen::MatrixXd& d,
                       Objective obj) {
    const auto n = d.rows(), m = d.cols();
    const auto p = phi.size(), q = theta.size();
    Filtered out;
    out.v = Eigen::MatrixXd::Zero(n, m);
    out.f = Eigen::VectorXd::Ones(n);
    if (obj == Objective::css) {
        out.first = std::min<Eigen::Index>(p, n);
        for (Eigen::Index t = out.first; t < n; ++t) {
            out.v.row(t) = d.row(t);
            for (Eigen::Index i = 0; i < p; ++i) out.v.row(t) -= phi(i) * d.row(t - 1 - i);
            for (Eigen::Index j = 0; j < q && t - 1 - j >= out.first; ++j) out.v.row(t) -= theta(j) * out.v.row(t - 1 - j);
        }
        return out;
    }
    const auto r = std::max(p, q + 1);
    Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index i = 0; i < p; ++i) tm(i, 0) = phi(i);
    for (Eigen::Index i = 0; i + 1 < r; ++i) tm(i, i + 1) = 1;
    Eigen::VectorXd rv = Eigen::VectorXd::Zero(r);
    rv(0) = 1;
    for (Eigen::Index j = 0; j < q; ++j) rv(j + 1) = theta(j);
    const Eigen::MatrixXd rr = rv * rv.transpose();

    Eigen::MatrixXd pm;
    {
        const auto r2 = r * r;
        Eigen::MatrixXd kron(r2, r2);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < r; ++j) kron.block(i * r, j * r, r, r) = tm(i, j) * tm;
        const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(r2, r2) - kron;
        const Eigen::VectorXd vec = lhs.partialPivLu().solve(Eigen::Map<const Eigen::VectorXd>(rr.data(), r2));
        pm = Eigen::Map<const Eigen::MatrixXd>(vec.data(), r, r);
        pm = 0.5 * (pm + pm.transpose()).eval();
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r, m);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double f = pm(0, 0);
        out.f(t) = f;
        out.v.row(t) = d.row(t) - a.row(0);
        const Eigen::VectorXd k = tm * pm.col(0) / f;
        a = (tm * a + k * out.v.row(t)).eval();
        pm = (tm * pm * tm.transpose() + rr - f * k * k.transpose()).eval();
        pm = 0.5 * (pm + pm.transpose()).eval();
    }
    return out;
}

inline Eigen::MatrixXd stack(const Eigen::VectorXd& y, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd d(y.size(), 1 + x.cols());
    d.col(0) = y;
    d.rightCols(x.cols()) = x;
    return d;
}

inline Eigen::VectorXd contributions(const ArmaParams& prm, const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                     Objective obj) {
    Eigen::VectorXd u = y;
    if (x.cols()) u -= x * prm.beta;
    const auto fl = filter(prm.phi, prm.theta, u, obj);
    const auto n = y.size() - fl.first;
    Eigen::VectorXd ll(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double v = fl.v(fl.first + t, 0), f = prm.sigma2 * fl.f(fl.first + t);
        ll(t) = -0.5 * (std::log(2 * std::numbers::pi) + std::log(f) + v * v / f);
    }
    return ll;
}

struct Concentrated {
    Eigen::VectorXd beta;
    double sigma2 = 0;
    double loglik = 0;
};

/// Profiles beta (GLS on filtered data) and sigma2 out of the likelihood.
inline Concentrated concentrate(const Eigen::VectorXd& phi, const Eigen::VectorXd& theta, const Eigen::MatrixXd& d,
                                Objective obj) {
    const auto fl = filter(phi, theta, d, obj);
    const auto n = d.rows() - fl.first;
    const Eigen::VectorXd w = fl.f.segment(fl.first, n).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd wd = w.asDiagonal() * fl.v.bottomRows(n);
    Concentrated c;
    Eigen::VectorXd e = wd.col(0);
    if (d.cols() > 1) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wd.rightCols(d.cols() - 1));
        c.beta = qr.solve(wd.col(0));
        e -= wd.rightCols(d.cols() - 1) * c.beta;
    }
    c.sigma2 = e.squaredNorm() / static_cast<double>(n);
    const double logdet = fl.f.segment(fl.first, n).array().log().sum();
    c.loglik = -0.5 * static_cast<double>(n) * (std::log(2 * std::numbers::pi) + 1 + std::log(c.sigma2)) - 0.5 * logdet;
    return c;
}

/// Hannan-Rissanen: long AR for innovation proxies, then OLS of e_t on its own
/// lags and lagged proxies. Returns false when there is too little data.
inline bool hannan_rissanen(const Eigen::VectorXd& e, int p, int q, Eigen::VectorXd& phi, Eigen::VectorXd& theta) {
    const auto n = static_cast<int>(e.size());
    Eigen::VectorXd eps = Eigen::VectorXd::Zero(n);
    int start = p;
    try {
        if (q > 0) {
            const int m = std::min(std::max(p + q, 4), (n - 1) / 3);
            if (m < 1) return false;
            Eigen::MatrixXd z(n - m, m);
            for (int t = m; t < n; ++t)
                for (int i = 0; i < m; ++i) z(t - m, i) = e(t - 1 - i);
            const auto f = ols(z, e.tail(n - m));
            eps.tail(n - m) = f.resid;
            start = std::max(p, m + q);
        }
        const int rows = n - start;
        if (rows <= p + q) return false;
        Eigen::MatrixXd z(rows, p + q);
        for (int t = start; t < n; ++t) {
            for (int i = 0; i < p; ++i) z(t - start, i) = e(t - 1 - i);
            for (int j = 0; j < q; ++j) z(t - start, p + j) = eps(t - 1 - j);
        }
        const auto f = ols(z, e.tail(rows));
        phi = f.beta.head(p);
        theta = f.beta.tail(q);
        return phi.allFinite() && theta.allFinite();
    } catch (const Error&) {
        return false;
    }
}

inline Eigen::VectorXd pack(const ArmaParams& a) {
    Eigen::VectorXd v(a.beta.size() + a.phi.size() + a.theta.size() + 1);
    v << a.beta, a.phi, a.theta, a.sigma2;
    return v;
}

inline ArmaParams unpack(const Eigen::VectorXd& v, Eigen::Index k, Eigen::Index p, Eigen::Index q) {
    return {v.head(k), v.segment(k, p), v.segment(k + p, q), v(k + p + q)};
}

}  // namespace arma_detail

inline void validate(const RegressionSpec& s) {
    if (s.x.rows() != s.y.size()) throw LengthMismatch("regressor rows and response length differ");
    if (s.p < 0 || s.q < 0) throw InvalidArgument("ARMA orders must be non-negative");
    if (!s.y.allFinite() || !s.x.allFinite()) throw InvalidArgument("regression data contain missing or non-finite values");
    if (s.p + s.q + s.x.cols() >= s.y.size()) throw SeriesTooShort("p + q + regressors must be below the series length");
}

/// Exact Gaussian log-likelihood of y - X beta under ARMA(p, q) errors, via
/// the Kalman filter on a Harvey state-space form.
inline double kalman_loglik(const ArmaParams& prm, const RegressionSpec& s, Objective obj = Objective::exact) {
    if (s.x.rows() != s.y.size() || prm.beta.size() != s.x.cols()) throw LengthMismatch("beta does not match regressors");
    if (prm.phi.size() != s.p || prm.theta.size() != s.q) throw InvalidArgument("parameter orders do not match the spec");
    if (!(prm.sigma2 > 0)) throw InvalidArgument("sigma2 must be positive");
    if (!arma_detail::stationary(prm.phi)) throw NonStationaryParams("AR parameters are not stationary");
    return arma_detail::contributions(prm, s.y, s.x, obj).sum();
}

/// ARMA(p, q) error series added to X beta. A burn-in of 10 (p + q + 1) draws
/// is discarded.
inline Eigen::VectorXd simulate_arma(const Eigen::VectorXd& beta, const Eigen::VectorXd& phi, const Eigen::VectorXd& theta,
                                     double sigma2, const Eigen::MatrixXd& x, Eigen::Index n, std::uint64_t seed) {
    if (x.rows() != n || x.cols() != beta.size()) throw LengthMismatch("X must be n x len(beta)");
    if (!(sigma2 >= 0)) throw InvalidArgument("sigma2 must be non-negative");
    if (!arma_detail::stationary(phi)) throw NonStationaryParams("AR parameters are not stationary");
    if (!arma_detail::stationary(-theta)) throw NonStationaryParams("MA parameters are not invertible");
    const auto p = phi.size(), q = theta.size();
    const auto burn = 10 * (p + q + 1);
    const auto total = burn + n;
    Rng rng(seed);
    const double sd = std::sqrt(sigma2);
    std::vector<double> eps(static_cast<std::size_t>(total)), u(static_cast<std::size_t>(total));
    for (Eigen::Index t = 0; t < total; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        eps[ti] = sd * rng.normal();
        double v = eps[ti];
        for (Eigen::Index i = 0; i < p && t - 1 - i >= 0; ++i) v += phi(i) * u[ti - 1 - static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < q && t - 1 - j >= 0; ++j) v += theta(j) * eps[ti - 1 - static_cast<std::size_t>(j)];
        u[ti] = v;
    }
    Eigen::VectorXd y = x.cols() ? Eigen::VectorXd(x * beta) : Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) y(t) += u[static_cast<std::size_t>(burn + t)];
    return y;
}

/// Maximum-likelihood regression with ARMA(p, q) errors.
inline RegressionFit fit_arma_regression(const RegressionSpec& s, const FitOptions& opt = {}) {
    using namespace arma_detail;
    validate(s);
    const auto n = s.y.size(), k = s.x.cols();
    const int p = s.p, q = s.q;
    RegressionFit fit;
    fit.objective = opt.objective;
    fit.nobs = opt.objective == Objective::css ? n - p : n;
    if (n - (k + p + q) < 10)
        fit.warnings.push_back("small sample: " + std::to_string(n) + " observations for " + std::to_string(k + p + q) +
                               " mean and ARMA parameters");

    Eigen::VectorXd e = s.y;
    Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(k);
    if (k) {
        const auto o = ols(s.x, s.y);
        beta0 = o.beta;
        e = o.resid;
    }
    const double scale = std::sqrt(e.squaredNorm() / static_cast<double>(n));
    if (!(scale > 1e-12 * std::max(1.0, s.y.cwiseAbs().maxCoeff()))) {
        fit.beta = beta0;
        fit.phi = Eigen::VectorXd::Zero(p);
        fit.theta = Eigen::VectorXd::Zero(q);
        fit.sigma2 = 0;
        fit.se = fit.se_hessian = Eigen::VectorXd::Constant(fit.param_count(), std::numeric_limits<double>::quiet_NaN());
        fit.loglik = std::numeric_limits<double>::quiet_NaN();
        fit.loglik_start = fit.loglik;
        fit.degenerate_variance = true;
        fit.converged = true;
        fit.warnings.push_back("DegenerateVariance: residual variance is zero");
        return fit;
    }

    // Work on y / scale so the optimiser sees the same problem for any units.
    const Eigen::VectorXd yn = s.y / scale;
    const Eigen::MatrixXd d = stack(yn, s.x);

    Eigen::VectorXd phi0 = Eigen::VectorXd::Zero(p), theta0 = Eigen::VectorXd::Zero(q);
    if (p + q > 0 && !hannan_rissanen(e / scale, p, q, phi0, theta0)) {
        phi0.setZero();
        theta0.setZero();
        fit.warnings.push_back("Hannan-Rissanen start failed; starting from zero ARMA parameters");
    }
    phi0 = shrink_to_stationary(phi0);
    theta0 = -shrink_to_stationary(-theta0);

    Eigen::VectorXd u0(p + q);
    u0 << unconstrain(phi0), unconstrain(-theta0);
    auto objective = [&](const Eigen::VectorXd& u) {
        return -concentrate(constrain(u.head(p)), -constrain(u.tail(q)), d, opt.objective).loglik;
    };
    const double start = -objective(u0);
    const auto res = bfgs(objective, u0, opt.bfgs);

    fit.phi = constrain(res.x.head(p));
    fit.theta = -constrain(res.x.tail(q));
    if (!stationary(fit.phi)) throw NonStationaryParams("fitted AR polynomial has a root on or inside the unit circle");
    const auto c = concentrate(fit.phi, fit.theta, d, opt.objective);
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    if (!fit.converged) fit.warnings.push_back("NonConvergence: optimiser stopped before meeting its tolerance");
    const auto near_edge = [](const Eigen::VectorXd& a) {
        return a.size() && ar_to_pacf(a).cwiseAbs().maxCoeff() > 0.999;
    };
    if (near_edge(fit.phi)) fit.warnings.push_back("AR part at the stationarity boundary; standard errors are unreliable");
    if (near_edge(-fit.theta)) fit.warnings.push_back("MA part at the invertibility boundary; standard errors are unreliable");

    ArmaParams hat{k ? c.beta : Eigen::VectorXd(0), fit.phi, fit.theta, c.sigma2};
    const double log_scale = std::log(scale) * static_cast<double>(fit.nobs);
    fit.loglik = c.loglik - log_scale;
    fit.loglik_start = start - log_scale;

    // Hessian and OPG of the unconcentrated likelihood in natural parameters.
    const Eigen::VectorXd psi = pack(hat);
    const auto m = psi.size();
    auto contrib = [&](const Eigen::VectorXd& v) {
        const auto a = unpack(v, k, p, q);
        if (!(a.sigma2 > 0) || !stationary(a.phi)) throw NonStationaryParams("perturbed parameters left the admissible region");
        return contributions(a, yn, s.x, opt.objective);
    };
    Eigen::VectorXd se = Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd se_h = se;
    try {
        Eigen::VectorXd step(m);
        for (Eigen::Index i = 0; i < m; ++i) step(i) = 1e-4 * std::max(1.0, std::abs(psi(i)));
        step(m - 1) = std::min(step(m - 1), 0.5 * psi(m - 1));
        Eigen::MatrixXd scores(fit.nobs, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::VectorXd a = psi, b = psi;
            a(i) += step(i);
            b(i) -= step(i);
            scores.col(i) = (contrib(a) - contrib(b)) / (2 * step(i));
        }
        auto total = [&](const Eigen::VectorXd& v) { return contrib(v).sum(); };
        Eigen::MatrixXd info(m, m);
        const double f0 = total(psi);
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = i; j < m; ++j) {
                double h;
                if (i == j) {
                    Eigen::VectorXd a = psi, b = psi;
                    a(i) += step(i);
                    b(i) -= step(i);
                    h = (total(a) - 2 * f0 + total(b)) / (step(i) * step(i));
                } else {
                    Eigen::VectorXd pp = psi, pm_ = psi, mp = psi, mm = psi;
                    pp(i) += step(i), pp(j) += step(j);
                    pm_(i) += step(i), pm_(j) -= step(j);
                    mp(i) -= step(i), mp(j) += step(j);
                    mm(i) -= step(i), mm(j) -= step(j);
                    h = (total(pp) - total(pm_) - total(mp) + total(mm)) / (4 * step(i) * step(j));
                }
                info(i, j) = info(j, i) = -h;
            }
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all()) {
            const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
            const Eigen::MatrixXd sand = inv * (scores.transpose() * scores) * inv;
            se_h = inv.diagonal().cwiseMax(0.0).cwiseSqrt();
            se = sand.diagonal().cwiseMax(0.0).cwiseSqrt();
        } else {
            fit.warnings.push_back("information matrix is not positive definite; standard errors unavailable");
        }
    } catch (const NonStationaryParams&) {
        fit.warnings.push_back("parameters at the stationarity boundary; standard errors unavailable");
    }

    fit.beta = hat.beta * scale;
    fit.sigma2 = hat.sigma2 * scale * scale;
    se.head(k) *= scale;
    se_h.head(k) *= scale;
    se(m - 1) *= scale * scale;
    se_h(m - 1) *= scale * scale;
    fit.se = se;
    fit.se_hessian = se_h;
    return fit;
}

}  // namespace chplane::econ
