#pragma once

// Gradient descent on a shallow linear model, started at zero. The iterates
// stay in the row space of X, so on an underdetermined system GD converges
// to the minimum-norm interpolant (the maximum-margin one among those that
// fit y exactly).

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "normlab/error.hpp"

namespace normlab::analysis {

struct MinNormReport {
    Eigen::VectorXd weights;
    double norm = 0;
    double margin = 0;             // min_n y_n <w,x_n> / ||w||
    double final_loss = 0;         // (1/2N) ||Xw - y||^2
    double max_orthogonal = 0;     // max over iterates of ||(I - P_row) w||
    std::size_t iterations = 0;
    double learning_rate = 0;
    double lr_limit = 0;           // 2 / lambda_max(X^T X / N)
};

/// Orthonormal basis of the row space of X (columns of the result).
inline Eigen::MatrixXd row_space_basis(const Eigen::MatrixXd& x) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(x.rows(), x.cols()) * std::numeric_limits<double>::epsilon() *
                       (sv.size() ? sv(0) : 0.0);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    return svd.matrixV().leftCols(rank);
}

/// Runs `iterations` steps of w <- w - lr * X^T (Xw - y) / N from w = 0.
/// Throws NumericError when the loss grows (divergence).
inline MinNormReport min_norm_gd_demo(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lr,
                                      std::size_t iterations) {
    if (x.rows() == 0 || x.cols() == 0) throw ConfigError("empty design matrix");
    if (y.size() != x.rows()) throw ShapeError("targets do not match the design matrix");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    const double n = double(x.rows());
    MinNormReport rep;
    rep.learning_rate = lr;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x / n, Eigen::EigenvaluesOnly);
    rep.lr_limit = 2.0 / eig.eigenvalues().maxCoeff();

    const Eigen::MatrixXd basis = row_space_basis(x);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
    auto loss_of = [&](const Eigen::VectorXd& v) { return (x * v - y).squaredNorm() / (2.0 * n); };
    double best = loss_of(w);
    for (std::size_t t = 0; t < iterations; ++t) {
        w -= lr * x.transpose() * (x * w - y) / n;
        const double loss = loss_of(w);
        if (!std::isfinite(loss) || loss > 2.0 * best + 1e-12)
            throw NumericError("gradient descent diverged at iteration " + std::to_string(t) +
                               " (learning rate " + std::to_string(lr) + ", limit " + std::to_string(rep.lr_limit) + ")");
        best = std::min(best, loss);
        const Eigen::VectorXd orth = w - basis * (basis.transpose() * w);
        rep.max_orthogonal = std::max(rep.max_orthogonal, orth.norm());
    }
    rep.weights = w;
    rep.iterations = iterations;
    rep.final_loss = loss_of(w);
    rep.norm = w.norm();
    rep.margin = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.rows(); ++i) rep.margin = std::min(rep.margin, y(i) * x.row(i).dot(w));
    rep.margin = rep.norm > 0 ? rep.margin / rep.norm : 0.0;
    return rep;
}

}  // namespace normlab::analysis
