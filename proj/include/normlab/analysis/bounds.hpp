#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "normlab/analysis/statistics.hpp"

namespace normlab::analysis {

/// c2 * sqrt(ln(1/delta) / 2N) with c2 = 1.
inline double confidence_term(double delta, std::size_t n) {
    if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0,1)");
    if (n == 0) throw ConfigError("sample size must be positive");
    return std::sqrt(std::log(1.0 / delta) / (2.0 * double(n)));
}

/// Train/test gap summary for a set of (normalized train loss, normalized
/// test loss) points. The complexity term is not evaluated; the fitted
/// intercept stands in for the whole right-hand side ("offset").
struct BoundReport {
    std::vector<double> gaps;      // |test - train| per point
    double max_gap = 0;
    double mean_gap = 0;
    LinearFit fit;
    double offset = 0;             // fit intercept
    double confidence_term = 0;
    double delta = 0.05;
    std::size_t sample_size = 0;
    double threshold = 0.15;
    bool tight = false;            // |offset| < threshold
    std::string caveat =
        "cross-entropy is unbounded; gaps are reported on the raw normalized loss without clipping";
};

inline BoundReport bound_report(std::span<const Point> normalized, double delta, std::size_t n,
                                double threshold = 0.15) {
    BoundReport rep;
    rep.delta = delta;
    rep.sample_size = n;
    rep.threshold = threshold;
    rep.confidence_term = confidence_term(delta, n);
    for (const auto& p : normalized) rep.gaps.push_back(std::abs(p.y - p.x));
    for (double g : rep.gaps) {
        rep.max_gap = std::max(rep.max_gap, g);
        rep.mean_gap += g / double(rep.gaps.size());
    }
    rep.fit = linear_fit(normalized);
    rep.offset = rep.fit.intercept;
    rep.tight = std::abs(rep.offset) < threshold;
    return rep;
}

struct RademacherEstimate {
    double estimate = 0;
    double standard_error = 0;
    std::size_t trials = 0;
    double data_bound = 0;     // X = max_i ||x_i||_2
    double weight_bound = 0;   // W
    double ceiling = 0;        // X W / sqrt(N)
};

/// Monte Carlo empirical Rademacher complexity of {x -> <w,x> : ||w||_2 <= W}.
/// For each sign draw the supremum is exactly (W/N) ||sum_i sigma_i x_i||_2.
inline RademacherEstimate rademacher_linear(const std::vector<std::vector<double>>& xs, double w_bound,
                                            std::size_t trials, std::uint64_t seed) {
    if (xs.empty()) throw ConfigError("Rademacher estimate needs data");
    if (trials == 0) throw ConfigError("Rademacher estimate needs at least one trial");
    if (!(w_bound >= 0)) throw ConfigError("weight bound must be non-negative");
    const std::size_t n = xs.size(), d = xs[0].size();
    RademacherEstimate est;
    est.trials = trials;
    est.weight_bound = w_bound;
    for (const auto& x : xs) {
        if (x.size() != d) throw ShapeError("Rademacher data vectors differ in length");
        double s = 0;
        for (double v : x) s += v * v;
        est.data_bound = std::max(est.data_bound, std::sqrt(s));
    }
    est.ceiling = est.data_bound * w_bound / std::sqrt(double(n));
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> sum(d);
    double mean = 0, m2 = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::fill(sum.begin(), sum.end(), 0.0);
        for (const auto& x : xs) {
            const double sigma = coin(rng) ? 1.0 : -1.0;
            for (std::size_t j = 0; j < d; ++j) sum[j] += sigma * x[j];
        }
        double norm = 0;
        for (double v : sum) norm += v * v;
        const double value = w_bound * std::sqrt(norm) / double(n);
        const double delta = value - mean;
        mean += delta / double(t + 1);
        m2 += delta * (value - mean);
    }
    est.estimate = mean;
    est.standard_error = trials > 1 ? std::sqrt(m2 / double(trials - 1) / double(trials)) : 0.0;
    return est;
}

/// Lp norm of a vector (p may be infinity).
inline double lp_norm(std::span<const double> x, double p) {
    double acc = 0;
    if (std::isinf(p)) {
        for (double v : x) acc = std::max(acc, std::abs(v));
        return acc;
    }
    for (double v : x) acc += std::pow(std::abs(v), p);
    return std::pow(acc, 1.0 / p);
}

/// Checks ||x||_q <= ||x||_p <= n^{1/p-1/q} ||x||_q for p <= q.
struct NormEquivalenceReport {
    double norm_p = 0, norm_q = 0;
    double lower_ratio = 0;   // ||x||_p / ||x||_q        (>= 1)
    double upper_ratio = 0;   // ||x||_p / (n^{1/p-1/q} ||x||_q)  (<= 1)
    bool holds = false;
};

inline NormEquivalenceReport norm_equivalence_check(std::span<const double> x, double p, double q,
                                                    double tolerance = 1e-12) {
    if (x.empty()) throw ConfigError("norm equivalence check needs a non-empty vector");
    if (!(p >= 1 && q >= p)) throw ConfigError("need 1 <= p <= q");
    NormEquivalenceReport rep;
    rep.norm_p = lp_norm(x, p);
    rep.norm_q = lp_norm(x, q);
    if (rep.norm_q == 0) {
        rep.lower_ratio = rep.upper_ratio = 1;
        rep.holds = true;
        return rep;
    }
    const double inv_q = std::isinf(q) ? 0.0 : 1.0 / q;
    const double factor = std::pow(double(x.size()), 1.0 / p - inv_q);
    rep.lower_ratio = rep.norm_p / rep.norm_q;
    rep.upper_ratio = rep.norm_p / (factor * rep.norm_q);
    rep.holds = rep.lower_ratio >= 1 - tolerance && rep.upper_ratio <= 1 + tolerance;
    return rep;
}

}  // namespace normlab::analysis
