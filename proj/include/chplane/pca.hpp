#pragma once

#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "chplane/error.hpp"

namespace chplane {

struct PcaOptions {
    bool standardize = false;  // z-score columns before the decomposition
};

/// Principal axes of a row-sample matrix. Components are rows; each has its
/// largest-magnitude entry positive.
struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // per-column divisor (ones unless standardized)
    Eigen::MatrixXd components;
    Eigen::VectorXd explained_variance;
    double total_variance = 0;

    [[nodiscard]] Eigen::Index input_dim() const noexcept { return mean.size(); }
    [[nodiscard]] Eigen::Index output_dim() const noexcept { return components.rows(); }

    [[nodiscard]] Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const {
        if (rows.cols() != input_dim()) throw DimensionMismatch("projection input has wrong dimension");
        const Eigen::MatrixXd centered =
            (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
        return centered * components.transpose();
    }

    [[nodiscard]] Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& scores) const {
        if (scores.cols() != output_dim()) throw DimensionMismatch("scores have wrong dimension");
        Eigen::MatrixXd x = scores * components;
        x = x.array().rowwise() * scale.transpose().array();
        return x.rowwise() + mean.transpose();
    }
};

inline PcaModel fit_pca(const Eigen::MatrixXd& rows, std::size_t k, const PcaOptions& opt = {}) {
    const auto n = rows.rows();
    const auto d = rows.cols();
    if (k < 1) throw InvalidArgument("k must be >= 1");
    if (static_cast<Eigen::Index>(k) >= n) throw InsufficientRows("PCA needs more rows than components");
    if (static_cast<Eigen::Index>(k) > d) throw InvalidArgument("k exceeds the data dimension");
    if (!rows.allFinite()) throw InvalidArgument("PCA input contains non-finite values");

    PcaModel m;
    m.mean = rows.colwise().mean().transpose();
    Eigen::MatrixXd centered = rows.rowwise() - m.mean.transpose();
    m.scale = Eigen::VectorXd::Ones(d);
    if (opt.standardize) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0) m.scale(j) = sd;
        }
        centered = centered.array().rowwise() / m.scale.transpose().array();
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double denom = static_cast<double>(n - 1);
    m.total_variance = sv.squaredNorm() / denom;
    const auto kk = static_cast<Eigen::Index>(k);
    m.components = svd.matrixV().leftCols(kk).transpose();
    m.explained_variance = sv.head(kk).array().square() / denom;
    for (Eigen::Index c = 0; c < kk; ++c) {
        Eigen::Index arg = 0;
        double best = -1;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double a = std::abs(m.components(c, j));
            if (a > best + 1e-12) {
                best = a;
                arg = j;
            }
        }
        if (m.components(c, arg) < 0) m.components.row(c) *= -1.0;
    }
    return m;
}

}  // namespace chplane
