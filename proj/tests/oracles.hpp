#pragma once

// Reference implementations built on different algorithms from the library.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "normlab/analysis/statistics.hpp"

namespace testing_util {

struct OlsOracle {
    double slope, intercept, r2, adjusted_r2, rmse;
};

/// Least squares through a QR solve of the design matrix [1 x].
inline OlsOracle ols_oracle(const std::vector<normlab::analysis::Point>& pts) {
    const Eigen::Index n = Eigen::Index(pts.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = pts[std::size_t(i)].x;
        y(i) = pts[std::size_t(i)].y;
    }
    const Eigen::Vector2d beta = a.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd resid = y - a * beta;
    const double sse = resid.squaredNorm();
    const double sst = (y.array() - y.mean()).matrix().squaredNorm();
    OlsOracle o;
    o.intercept = beta(0);
    o.slope = beta(1);
    o.r2 = sst > 0 ? 1 - sse / sst : 1.0;
    o.adjusted_r2 = n > 2 ? 1 - (1 - o.r2) * double(n - 1) / double(n - 2) : o.r2;
    o.rmse = std::sqrt(sse / double(n));
    return o;
}

/// Minimum-norm least-squares solution X^+ y.
inline Eigen::VectorXd min_norm_oracle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    return x.completeOrthogonalDecomposition().pseudoInverse() * y;
}

/// Random underdetermined system with +-1 targets.
inline void random_system(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, Eigen::MatrixXd& x,
                          Eigen::VectorXd& y) {
    std::normal_distribution<double> g;
    x.resize(n, d);
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng);
        y(i) = g(rng) < 0 ? -1.0 : 1.0;
    }
}

}  // namespace testing_util
