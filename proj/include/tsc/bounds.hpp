#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tsc/markov.hpp"

namespace tsc {

// The four-term first-jump functional M(lambda, delta, gamma); survival from
// ({O},{e1}) forces M >= 1, so M < 1 certifies extinction.
double m_function(double lambda, double delta, double gamma, int d);

// Closed-form lower bound on the critical per-neighbor rate:
// (1+d+g)/(2dg) * (2+d+g) / (1 + [1 - (1/2d)(1+1/g)](1+d+g)).
// Throws DimensionTooSmall when the denominator is not positive.
double lower_bound_337(int d, double delta, double gamma);

// (f1, f2): the dimension-free constants sandwiching
// d (2d lambda_c(d) - (1+delta+gamma)/gamma).
std::pair<double, double> f_constants(double delta, double gamma);

struct SweepPoint {
    double lambda;  // per-neighbor infection rate
    SurvivalEstimate estimate;
};

struct McBracket {
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    bool degenerate = false;  // no threshold crossing inside the grid
    double threshold = 0.0;
    std::vector<SweepPoint> sweep;
};

struct BracketBudget {
    std::int64_t replicas = 1000;
    double horizon = 20.0;
    int L = 3;
    std::int64_t survivor_cap = 300;
    double threshold = 0.02;
    std::uint64_t seed = 0;
    int workers = 1;
    // 0 = unlimited; otherwise grid points * replicas must stay under this.
    std::int64_t max_total_replicas = 0;
};

// Survival sweep over the lambda grid from the single-fully-infected start;
// the bracket is the first grid interval where survival crosses the
// threshold. Throws BudgetExceeded before simulating when over budget.
McBracket bracket_critical(int d, double delta, double gamma,
                           const std::vector<double>& lambda_grid,
                           const BracketBudget& budget);

}  // namespace tsc
