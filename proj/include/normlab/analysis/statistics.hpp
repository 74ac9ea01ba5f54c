#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "normlab/error.hpp"

namespace normlab::analysis {

struct Point {
    double x = 0;
    double y = 0;
};

/// Ordinary least squares y = slope*x + intercept.
struct LinearFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    double adjusted_r2 = 0;   // one predictor
    double rmse = 0;          // sqrt(SSE / n)
    std::size_t count = 0;
};

inline LinearFit linear_fit(std::span<const Point> pts) {
    const std::size_t n = pts.size();
    if (n < 2) throw ConfigError("linear fit needs at least 2 points");
    double mx = 0, my = 0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pts) {
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
    }
    if (!(sxx > 0)) throw ConfigError("linear fit needs non-constant x");
    LinearFit f;
    f.count = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (const auto& p : pts) {
        const double r = p.y - (f.slope * p.x + f.intercept);
        sse += r * r;
    }
    // A constant response fitted exactly counts as a perfect fit.
    f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    f.adjusted_r2 = n > 2 ? 1.0 - (1.0 - f.r2) * double(n - 1) / double(n - 2) : f.r2;
    f.rmse = std::sqrt(sse / double(n));
    return f;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ConfigError("correlation needs two equal-length series (n >= 2)");
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0 && sbb > 0)) throw ConfigError("correlation of a constant series");
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = ranks(a), rb = ranks(b);
    return pearson(ra, rb);
}

/// psi(x) = 1 - sqrt(1 - x^2), the psi-transform of the exponential loss.
inline double psi_transform(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("psi-transform is defined on [0,1]");
    return 1.0 - std::sqrt(1.0 - x * x);
}

}  // namespace normlab::analysis
