#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace chplane::econ {

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = 0;
    int iterations = 0;
    bool converged = false;
};

struct BfgsOptions {
    int max_iter = 500;
    double grad_tol = 1e-6;
    double f_tol = 1e-12;
};

inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd t = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
        t(i) = x(i) + h;
        const double fp = f(t);
        t(i) = x(i) - h;
        const double fm = f(t);
        t(i) = x(i);
        g(i) = (fp - fm) / (2 * h);
    }
    return g;
}

/// Quasi-Newton minimisation with BFGS inverse-Hessian updates, central
/// difference gradients and a backtracking Armijo line search. Non-finite
/// objective values are treated as +inf.
inline MinimizeResult bfgs(const std::function<double(const Eigen::VectorXd&)>& fn, Eigen::VectorXd x0,
                           const BfgsOptions& opt = {}) {
    auto f = [&](const Eigen::VectorXd& x) {
        const double v = fn(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    MinimizeResult r;
    r.x = std::move(x0);
    r.f = f(r.x);
    const auto n = r.x.size();
    if (n == 0) {
        r.converged = true;
        return r;
    }
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = numeric_gradient(f, r.x);
    for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
        if (!g.allFinite()) break;
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            r.converged = true;
            break;
        }
        Eigen::VectorXd dir = -hinv * g;
        if (g.dot(dir) >= 0) {
            hinv.setIdentity();
            dir = -g;
        }
        double step = 1.0;
        const double slope = g.dot(dir);
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        for (int ls = 0; ls < 60; ++ls) {
            x_new = r.x + step * dir;
            f_new = f(x_new);
            if (f_new <= r.f + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (!(f_new <= r.f)) break;
        const Eigen::VectorXd g_new = numeric_gradient(f, x_new);
        const Eigen::VectorXd s = x_new - r.x;
        const Eigen::VectorXd yv = g_new - g;
        const double f_old = r.f;
        r.x = x_new;
        r.f = f_new;
        g = g_new;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd i_n = Eigen::MatrixXd::Identity(n, n);
            hinv = (i_n - rho * s * yv.transpose()) * hinv * (i_n - rho * yv * s.transpose()) + rho * s * s.transpose();
        }
        if (std::abs(f_old - f_new) <= opt.f_tol * std::max(1.0, std::abs(f_new)) && s.lpNorm<Eigen::Infinity>() < 1e-8) {
            r.converged = true;
            break;
        }
    }
    if (!r.converged && g.allFinite() && g.lpNorm<Eigen::Infinity>() < 1e-4) r.converged = true;
    return r;
}

}  // namespace chplane::econ
