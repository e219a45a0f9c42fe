#include <doctest.h>

#include <cmath>

#include "tsc/branching.hpp"
#include "tsc/errors.hpp"
#include "tsc/markov.hpp"
#include "tsc/rng.hpp"

using namespace tsc;

TEST_CASE("mean offspring of a type-2 individual") {
    CHECK(mean_offspring(3.0, 1.0, 2.0) == doctest::Approx(1.5));
    // criticality boundary: lambda = (1+delta+gamma)/gamma
    CHECK(mean_offspring(2.0, 1.0, 2.0) == doctest::Approx(1.0));
    CHECK(mean_offspring(1e-12, 1.0, 2.0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("closed-form survival at lambda=3, delta=1, gamma=2") {
    CHECK(survival_closed_form(1, 0, 3, 1, 2) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(survival_closed_form(0, 1, 3, 1, 2) == doctest::Approx(2.0 / 9).epsilon(1e-12));
    CHECK(survival_closed_form(1, 1, 3, 1, 2) == doctest::Approx(13.0 / 27).epsilon(1e-12));
    CHECK(survival_closed_form(0, 0, 3, 1, 2) == 0.0);
    // pi(0,1) = gamma/(1+gamma) pi(1,0)
    CHECK(survival_closed_form(0, 1, 3, 1, 2) ==
          doctest::Approx((2.0 / 3.0) * survival_closed_form(1, 0, 3, 1, 2)).epsilon(1e-12));
    // subcritical clamps to zero
    CHECK(survival_closed_form(3, 2, 1.5, 1, 2) == 0.0);
}

TEST_CASE("first-jump, product and root identities of the closed form") {
    for (double delta : {0.3, 1.0, 2.5, 4.0}) {
        for (double gamma : {0.5, 1.0, 2.0, 6.0}) {
            double lambda = 2.0 * (1.0 + delta + gamma) / gamma;
            double p10 = survival_closed_form(1, 0, lambda, delta, gamma);
            double p01 = survival_closed_form(0, 1, lambda, delta, gamma);
            double p11 = survival_closed_form(1, 1, lambda, delta, gamma);
            // pi(1,0) = l/(1+d+l) pi(1,1) + d/(1+d+l) pi(0,1)
            double rhs = (lambda * p11 + delta * p01) / (1.0 + delta + lambda);
            CHECK(std::fabs(p10 - rhs) <= 1e-12);
            // pi(0,1) = g/(1+g) pi(1,0)
            CHECK(std::fabs(p01 - gamma / (1.0 + gamma) * p10) <= 1e-12);
            // product structure for (n,m) = (2,3)
            double pnm = survival_closed_form(2, 3, lambda, delta, gamma);
            CHECK(std::fabs(pnm - (1.0 - std::pow(1.0 - p10, 2) * std::pow(1.0 - p01, 3))) <=
                  1e-12);
            // root identity
            double root = p10 * (lambda * gamma * (1.0 - p10) - (1.0 + delta + gamma));
            CHECK(std::fabs(root) <= 1e-12);
        }
    }
}

TEST_CASE("monotonicity of the closed form in n, m and lambda") {
    double prev = 0.0;
    for (double lambda : {2.1, 2.5, 3.0, 5.0, 10.0}) {
        double v = survival_closed_form(1, 0, lambda, 1, 2);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(survival_closed_form(2, 0, 3, 1, 2) >= survival_closed_form(1, 0, 3, 1, 2));
    CHECK(survival_closed_form(1, 2, 3, 1, 2) >= survival_closed_form(1, 1, 3, 1, 2));
}

TEST_CASE("simulate_branching basics") {
    BranchResult r = simulate_branching(BranchingState{0, 0}, 3, 1, 2, 1, 100);
    CHECK(r.outcome == BranchOutcome::Extinct);
    CHECK(r.time == 0.0);

    CHECK_THROWS_AS(simulate_branching(BranchingState{5, 5}, 3, 1, 2, 1, 10), ParameterError);

    // horizon censoring with huge rates and no cap
    BranchResult c = simulate_branching(BranchingState{1, 0}, 50, 1, 2, 7, 0, 0.01);
    CHECK((c.outcome == BranchOutcome::Censored || c.outcome == BranchOutcome::Extinct));
}

TEST_CASE("cap-hitting frequency approximates the closed form") {
    EstimateWithCI est =
        estimate_branching_survival(BranchingState{1, 0}, 3, 1, 2, 20000, 2000, 101);
    CHECK(std::fabs(est.point - 1.0 / 3) <= 3.0 * est.std_error + 1e-3);
    EstimateWithCI est01 =
        estimate_branching_survival(BranchingState{0, 1}, 3, 1, 2, 20000, 2000, 102);
    CHECK(std::fabs(est01.point - 2.0 / 9) <= 3.0 * est01.std_error + 1e-3);
}

TEST_CASE("truncated linear-solve oracle") {
    SUBCASE("matches the closed form at K=400") {
        double o = truncated_survival_oracle(BranchingState{1, 0}, 3, 1, 2, 400);
        CHECK(std::fabs(o - 1.0 / 3) <= 1e-3);
        double o01 = truncated_survival_oracle(BranchingState{0, 1}, 3, 1, 2, 400);
        CHECK(std::fabs(o01 - 2.0 / 9) <= 1e-3);
    }
    SUBCASE("monotone from above in K") {
        double prev = 1.0;
        for (std::int64_t K : {50, 100, 200, 400}) {
            double o = truncated_survival_oracle(BranchingState{1, 0}, 3, 1, 2, K);
            CHECK(o <= prev + 1e-12);
            CHECK(o >= 1.0 / 3 - 1e-9);  // converges from above
            prev = o;
        }
    }
    SUBCASE("subcritical tends to zero") {
        double o = truncated_survival_oracle(BranchingState{1, 0}, 1.2, 1, 2, 200);
        CHECK(o <= 0.05);
    }
    SUBCASE("product structure within oracle error") {
        double o10 = truncated_survival_oracle(BranchingState{1, 0}, 3, 1, 2, 400);
        double o01 = truncated_survival_oracle(BranchingState{0, 1}, 3, 1, 2, 400);
        double o21 = truncated_survival_oracle(BranchingState{2, 1}, 3, 1, 2, 400);
        double prod = 1.0 - std::pow(1.0 - o10, 2) * (1.0 - o01);
        CHECK(std::fabs(o21 - prod) <= 1e-3);
    }
    SUBCASE("bracket orders correctly") {
        OracleBracket b = truncated_survival_bracket(BranchingState{1, 0}, 3, 1, 2, 100);
        CHECK(b.lower <= b.upper);
        CHECK(b.upper <= 1.0);
    }
    SUBCASE("size guard") {
        CHECK_THROWS_AS(truncated_survival_oracle(BranchingState{1, 0}, 3, 1, 2, 5000),
                        SizeError);
        CHECK_THROWS_AS(truncated_survival_oracle(BranchingState{5, 0}, 3, 1, 2, 3),
                        ParameterError);
    }
}

TEST_CASE("on-off survival with rate lambda/(2d) is dominated by the branching bound") {
    // The on-off process started from n fully + m semi sites survives with
    // probability at most the branching survival pi-hat(n, m, lambda).
    const int d = 2;
    TorusSpec spec(d, 5);
    const double lambda_scaled = 8.0;
    Rates r{lambda_scaled / (2.0 * d), 1.0, 2.0};
    Configuration init;
    init.fully.insert(spec.origin());
    auto est = estimate_survival(ProcessKind::OnOff, spec, r, init, 25.0, 5000, 404, 500);
    double bound = survival_closed_form(1, 0, lambda_scaled, 1.0, 2.0);
    CHECK(est.point <= bound + 3.0 * est.std_error);
}
