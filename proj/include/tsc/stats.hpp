#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace tsc {

// Monte Carlo point estimate with sampling error and seed provenance.
struct EstimateWithCI {
    double point = 0.0;
    double std_error = 0.0;
    std::int64_t replicas = 0;
    std::uint64_t seed = 0;
};

inline EstimateWithCI binomial_estimate(std::int64_t successes, std::int64_t n,
                                        std::uint64_t seed) {
    EstimateWithCI e;
    e.replicas = n;
    e.seed = seed;
    e.point = n > 0 ? static_cast<double>(successes) / n : 0.0;
    e.std_error = n > 0 ? std::sqrt(e.point * (1.0 - e.point) / n) : 0.0;
    return e;
}

inline double combined_se(double se_a, double se_b) {
    return std::sqrt(se_a * se_a + se_b * se_b);
}

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t n = 0;
};

inline MeanEstimate mean_estimate(const std::vector<double>& xs) {
    MeanEstimate m;
    m.n = static_cast<std::int64_t>(xs.size());
    if (m.n == 0) return m;
    double s = 0.0;
    for (double x : xs) s += x;
    m.mean = s / m.n;
    if (m.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std_error = std::sqrt(ss / (m.n - 1) / m.n);
    }
    return m;
}

// Two-sample Kolmogorov-Smirnov statistic, D = sup |F_a - F_b|. Works on any
// real-valued samples; with integer-valued data the continuous critical value
// is conservative.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n = a.size(), m = b.size();
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < n && j < m) {
        double x = std::min(a[i], b[j]);
        while (i < n && a[i] <= x) ++i;
        while (j < m && b[j] <= x) ++j;
        double fa = static_cast<double>(i) / n;
        double fb = static_cast<double>(j) / m;
        d = std::max(d, std::fabs(fa - fb));
    }
    return d;
}

// Critical value of the two-sample KS test at level alpha (asymptotic form).
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
    double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

// P(Bin(M, p) >= k), exact summation via log-space terms.
inline double binomial_tail_geq(std::int64_t M, double p, std::int64_t k) {
    if (k <= 0) return 1.0;
    if (k > M) return 0.0;
    double lp = std::log(p), lq = std::log1p(-p);
    double total = 0.0;
    for (std::int64_t j = k; j <= M; ++j) {
        double lt = std::lgamma(M + 1.0) - std::lgamma(j + 1.0) - std::lgamma(M - j + 1.0) +
                    j * lp + (M - j) * lq;
        total += std::exp(lt);
    }
    return std::min(total, 1.0);
}

}  // namespace tsc
