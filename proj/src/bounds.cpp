#include "tsc/bounds.hpp"

#include <cmath>

namespace tsc {

double m_function(double lambda, double delta, double gamma, int d) {
    const double s = 1.0 + delta + gamma;
    const double A = (2.0 * d - 1.0) * lambda + 2.0 + delta + gamma;
    const double q = 2.0 * d * lambda / (2.0 * d * lambda + 1.0);
    return gamma / A * (4.0 * d - 1.0) * lambda / (2.0 * d * lambda + 1.0) +
           1.0 / A * (gamma / s) * q +
           (1.0 + delta) / A * q +
           (2.0 * d - 1.0) * lambda / A * (2.0 * d * lambda + 2.0) /
               (2.0 * d * lambda + 1.0);
}

double lower_bound_337(int d, double delta, double gamma) {
    const double s = 1.0 + delta + gamma;
    const double denom = 1.0 + (1.0 - (1.0 / (2.0 * d)) * (1.0 + 1.0 / gamma)) * s;
    if (!(denom > 0.0)) {
        throw DimensionTooSmall("lower_bound_337: 1 + [1 - (1/2d)(1+1/gamma)](1+delta+gamma) <= 0");
    }
    return s / (2.0 * d * gamma) * (2.0 + delta + gamma) / denom;
}

std::pair<double, double> f_constants(double delta, double gamma) {
    const double s = 1.0 + delta + gamma;
    double f1 = 0.5 * (1.0 + 1.0 / gamma) * s * s / (gamma * (2.0 + delta + gamma));
    double f2 = s / gamma * (1.0 + 1.0 / gamma);
    return {f1, f2};
}

McBracket bracket_critical(int d, double delta, double gamma,
                           const std::vector<double>& lambda_grid,
                           const BracketBudget& budget) {
    if (lambda_grid.empty()) throw ParameterError("lambda_grid: must be nonempty");
    if (budget.max_total_replicas > 0 &&
        static_cast<std::int64_t>(lambda_grid.size()) * budget.replicas >
            budget.max_total_replicas) {
        throw BudgetExceeded("bracket_critical: grid x replicas exceeds the budget");
    }
    TorusSpec spec(d, budget.L);
    Configuration initial;
    initial.fully.insert(spec.origin());

    McBracket out;
    out.threshold = budget.threshold;
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
        Rates r{lambda_grid[g], delta, gamma};
        SurvivalEstimate est = estimate_survival(
            ProcessKind::TwoStage, spec, r, initial, budget.horizon, budget.replicas,
            mix_seed(budget.seed, static_cast<std::uint64_t>(g)), budget.survivor_cap,
            budget.workers);
        out.sweep.push_back(SweepPoint{lambda_grid[g], est});
    }

    std::size_t cross = lambda_grid.size();
    for (std::size_t g = 0; g < out.sweep.size(); ++g) {
        if (out.sweep[g].estimate.point >= budget.threshold) {
            cross = g;
            break;
        }
    }
    if (cross == lambda_grid.size() || cross == 0) {
        out.degenerate = true;
        out.lambda_lo = lambda_grid.front();
        out.lambda_hi = lambda_grid.back();
    } else {
        out.lambda_lo = lambda_grid[cross - 1];
        out.lambda_hi = lambda_grid[cross];
    }
    return out;
}

}  // namespace tsc
