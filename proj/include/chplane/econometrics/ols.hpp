#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "chplane/error.hpp"

namespace chplane::econ {

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::VectorXd resid;
    Eigen::MatrixXd cov;
    double ssr = 0;
    double sigma2 = 0;  // ssr / (n - k)
    Eigen::Index nobs = 0;
};

inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size()) throw LengthMismatch("design rows and response length differ");
    if (x.rows() < x.cols() || x.cols() == 0) throw SingularDesign("design has fewer rows than columns");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < x.cols()) throw SingularDesign("design matrix is rank deficient");
    OlsFit f;
    f.nobs = x.rows();
    f.beta = qr.solve(y);
    f.resid = y - x * f.beta;
    f.ssr = f.resid.squaredNorm();
    const auto dof = x.rows() - x.cols();
    f.sigma2 = dof > 0 ? f.ssr / static_cast<double>(dof) : std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    f.cov = f.sigma2 * xtx_inv;
    f.se = f.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return f;
}

}  // namespace chplane::econ
