#pragma once

#include <cstdint>
#include <limits>

#include "tsc/stats.hpp"

namespace tsc {

// Two-type branching process: type 2 individuals die at rate 1, demote to
// type 1 at rate delta and give birth to a type 1 at rate lambda; type 1
// individuals die at rate 1 and promote to type 2 at rate gamma.
struct BranchingState {
    std::int64_t type2 = 0;  // zeta-hat
    std::int64_t type1 = 0;  // g-hat
    std::int64_t total() const { return type2 + type1; }
};

// Mean number of type-2 children of a type-2 individual: lambda*gamma/(1+delta+gamma).
// The process is supercritical iff this exceeds 1.
double mean_offspring(double lambda, double delta, double gamma);

// Survival probability started from n type-2 and m type-1 individuals.
// Subcritical or critical parameters return 0.
double survival_closed_form(std::int64_t n, std::int64_t m, double lambda, double delta,
                            double gamma);

enum class BranchOutcome { Extinct, ReachedCap, Censored };

struct BranchResult {
    BranchOutcome outcome = BranchOutcome::Extinct;
    double time = 0.0;  // event time; for cap-only runs this is jump count
    std::int64_t peak = 0;
};

// Exact simulation; cap == 0 disables the population cap, horizon == inf
// disables censoring. With no horizon the embedded jump chain is used (the
// outcome does not depend on event times).
BranchResult simulate_branching(BranchingState initial, double lambda, double delta,
                                double gamma, std::uint64_t seed, std::int64_t cap,
                                double horizon = std::numeric_limits<double>::infinity());

// decided_total > 0 short-circuits a replica as a cap-reacher once its total
// population hits that level; for supercritical parameters the probability of
// still dying from decided_total individuals is below (1 - pi(0,1))^decided_total,
// far under any Monte Carlo resolution. 0 keeps the fully exact walk to cap.
EstimateWithCI estimate_branching_survival(BranchingState initial, double lambda, double delta,
                                           double gamma, std::int64_t replicas,
                                           std::int64_t cap, std::uint64_t seed,
                                           int workers = 1, std::int64_t decided_total = 0);

// Absorption solve of the chain restricted to total population <= K.
// upper: reaching K counts as survival (converges to the truth from above);
// lower: reaching K counts as death.
struct OracleBracket {
    double upper = 0.0;
    double lower = 0.0;
    std::int64_t cap = 0;
};

OracleBracket truncated_survival_bracket(BranchingState initial, double lambda, double delta,
                                         double gamma, std::int64_t K);

// The upper variant alone (the spec's primary oracle value).
double truncated_survival_oracle(BranchingState initial, double lambda, double delta,
                                 double gamma, std::int64_t K);

}  // namespace tsc
