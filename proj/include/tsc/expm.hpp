#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

// Minimal CSR matrix, enough for generator/operator application.
class SparseCsr {
public:
    SparseCsr() = default;

    // Build from row-wise maps col -> value.
    static SparseCsr from_rows(const std::vector<std::map<int, double>>& rows) {
        SparseCsr m;
        m.n_ = static_cast<int>(rows.size());
        m.row_ptr_.reserve(m.n_ + 1);
        m.row_ptr_.push_back(0);
        for (const auto& r : rows) {
            for (const auto& [c, v] : r) {
                if (v != 0.0) {
                    m.cols_.push_back(c);
                    m.vals_.push_back(v);
                }
            }
            m.row_ptr_.push_back(static_cast<int>(m.cols_.size()));
        }
        return m;
    }

    int rows() const { return n_; }
    std::size_t nnz() const { return vals_.size(); }

    void apply(std::span<const double> in, std::span<double> out) const {
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                acc += vals_[k] * in[cols_[k]];
            }
            out[i] = acc;
        }
    }

    // out = A^T * in (used to push a distribution row-vector through a
    // generator stored row-wise).
    void apply_transpose(std::span<const double> in, std::span<double> out) const {
        for (int i = 0; i < n_; ++i) out[i] = 0.0;
        for (int i = 0; i < n_; ++i) {
            double x = in[i];
            if (x == 0.0) continue;
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                out[cols_[k]] += vals_[k] * x;
            }
        }
    }

    double min_diagonal() const {
        double mn = 0.0;
        for (int i = 0; i < n_; ++i) {
            for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
                if (cols_[k] == i) mn = std::min(mn, vals_[k]);
            }
        }
        return mn;
    }

private:
    int n_ = 0;
    std::vector<int> row_ptr_;
    std::vector<int> cols_;
    std::vector<double> vals_;
};

// Computes v <- v * e^{tQ} for a matrix Q with nonnegative off-diagonal
// entries, by uniformization: with P = I + Q/Lambda (entrywise nonnegative
// when Lambda >= max |diag|), e^{tQ} = e^{-Lambda t} sum (Lambda t)^k/k! P^k.
// All terms are nonnegative, so the series is numerically stable; truncation
// is driven to `tail_tol` of remaining Poisson mass.
inline std::vector<double> expm_transpose_apply(const SparseCsr& Q, std::vector<double> v,
                                                double t, double tail_tol = 1e-14) {
    if (t < 0.0) throw DomainError("expm: t must be >= 0");
    if (t == 0.0) return v;
    const int n = Q.rows();
    double lambda = -Q.min_diagonal();
    if (lambda <= 0.0) return v;  // Q == 0
    lambda *= 1.0001;
    const double a = lambda * t;

    std::vector<double> term = v;
    std::vector<double> acc(n, 0.0);
    std::vector<double> tmp(n, 0.0);

    // Poisson(a) weights via running recurrence in log space.
    double log_w = -a;  // log weight of k = 0
    double cum = 0.0;
    std::int64_t k = 0;
    const std::int64_t k_max =
        static_cast<std::int64_t>(a + 60.0 * std::sqrt(a + 1.0) + 60.0);
    for (;;) {
        double w = std::exp(log_w);
        cum += w;
        for (int i = 0; i < n; ++i) acc[i] += w * term[i];
        if (1.0 - cum < tail_tol && k > a) break;
        if (k >= k_max) break;
        // term <- term * P = term * (I + Q/lambda)
        Q.apply_transpose(term, tmp);
        for (int i = 0; i < n; ++i) term[i] += tmp[i] / lambda;
        ++k;
        log_w += std::log(a) - std::log(static_cast<double>(k));
    }
    return acc;
}

// Same series for a column vector: v <- e^{tA} v, A with nonnegative
// off-diagonals (CTMC generators and the moment operator both qualify).
inline std::vector<double> expm_apply(const SparseCsr& A, std::vector<double> v, double t,
                                      double tail_tol = 1e-14) {
    if (t < 0.0) throw DomainError("expm: t must be >= 0");
    if (t == 0.0) return v;
    const int n = A.rows();
    double lambda = -A.min_diagonal();
    if (lambda <= 0.0) lambda = 1.0;
    lambda *= 1.0001;
    const double a = lambda * t;

    std::vector<double> term = v;
    std::vector<double> acc(n, 0.0);
    std::vector<double> tmp(n, 0.0);

    double log_w = -a;
    double cum = 0.0;
    std::int64_t k = 0;
    const std::int64_t k_max =
        static_cast<std::int64_t>(a + 60.0 * std::sqrt(a + 1.0) + 60.0);
    for (;;) {
        double w = std::exp(log_w);
        cum += w;
        for (int i = 0; i < n; ++i) acc[i] += w * term[i];
        if (1.0 - cum < tail_tol && k > a) break;
        if (k >= k_max) break;
        A.apply(term, tmp);
        for (int i = 0; i < n; ++i) term[i] += tmp[i] / lambda;
        ++k;
        log_w += std::log(a) - std::log(static_cast<double>(k));
    }
    return acc;
}

}  // namespace tsc
