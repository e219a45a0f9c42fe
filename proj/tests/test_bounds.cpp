#include <doctest.h>

#include <cmath>

#include "tsc/bounds.hpp"
#include "tsc/walk_hitting.hpp"

using namespace tsc;

TEST_CASE("first-jump probabilities decompose to one") {
    const int d = 10;
    const double lambda = 0.11, delta = 1.0, gamma = 2.0;
    const double A = (2.0 * d - 1.0) * lambda + 2.0 + delta + gamma;
    double total = (1.0 + delta) / A + 1.0 / A + gamma / A + (2.0 * d - 1.0) * lambda / A;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("M crosses 1 exactly at the closed-form threshold") {
    const int d = 10;
    const double delta = 1.0, gamma = 2.0;
    double thr = lower_bound_337(d, delta, gamma);
    CHECK(m_function(thr - 1e-6, delta, gamma, d) < 1.0);
    CHECK(m_function(thr + 1e-6, delta, gamma, d) >= 1.0);

    // bisection on M - 1 matches the closed form to 1e-9
    double lo = 1e-6, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        if (m_function(mid, delta, gamma, d) < 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CHECK(std::fabs(0.5 * (lo + hi) - thr) <= 1e-9);

    // subcritical limit
    CHECK(m_function(1e-9, delta, gamma, d) < 1.0);
}

TEST_CASE("lower bound: plug-in value and asymptotics") {
    double lb = lower_bound_337(10, 1.0, 2.0);
    CHECK(lb == doctest::Approx(0.1 * 5.0 / 4.7).epsilon(1e-12));
    CHECK(std::fabs(lb - 0.106383) <= 1e-6);

    // scaled gap converges to f1 = 1.2, monotonically from above:
    // gap(d) = f1 / (1 - c/(2d)) with c = (1+1/gamma) s/(1+s)
    auto gap = [](int d) {
        return d * (2.0 * d * lower_bound_337(d, 1.0, 2.0) - 2.0);
    };
    CHECK(std::fabs(gap(10000) - 1.2) / 1.2 <= 0.01);
    double prev = gap(20);
    for (int d : {40, 80, 160}) {
        double g = gap(d);
        CHECK(g <= prev);
        CHECK(g >= 1.2);
        prev = g;
    }

    // gamma -> infinity: the scaled-gap limit tends to 1/2
    auto [f1_inf, f2_inf] = f_constants(1.0, 1e7);
    CHECK(std::fabs(f1_inf - 0.5) <= 1e-3);
    (void)f2_inf;

    CHECK_THROWS_AS(lower_bound_337(1, 30.0, 0.05), DimensionTooSmall);
}

TEST_CASE("f constants: plug-ins, ordering, gamma limit") {
    auto [f1, f2] = f_constants(1.0, 2.0);
    CHECK(f1 == doctest::Approx(1.2).epsilon(1e-12));
    CHECK(f2 == doctest::Approx(3.0).epsilon(1e-12));

    for (double gamma = 0.1; gamma <= 10.0; gamma += 0.5) {
        for (double delta = 0.1; delta <= 10.0; delta += 0.5) {
            auto [a, b] = f_constants(delta, gamma);
            CHECK(a < b);
        }
    }

    auto [g1, g2] = f_constants(1.0, 1000.0);
    CHECK(std::fabs(g1 - 0.5) / 0.5 <= 0.01);
    CHECK(std::fabs(g2 - 1.0) / 1.0 <= 0.01);
}

TEST_CASE("bound ordering and the Kesten upper trend") {
    for (int d : {10, 20, 50, 100, 200}) {
        double lb = lower_bound_337(d, 1.0, 2.0);
        double ub = lambda_tilde(d, 1.0, 2.0, kesten_plugin(d));
        CHECK(lb < ub);
    }
    // upper scaled gap decreases toward f2 as d grows
    auto gap_up = [](int d) {
        return d * (2.0 * d * lambda_tilde(d, 1.0, 2.0, kesten_plugin(d)) - 2.0);
    };
    double prev = gap_up(20);
    auto [f1, f2] = f_constants(1.0, 2.0);
    (void)f1;
    for (int d : {40, 80, 160}) {
        double g = gap_up(d);
        CHECK(g <= prev);
        CHECK(g >= f2);
        prev = g;
    }
    // leading order: both bounds x 2d approach (1+delta+gamma)/gamma
    CHECK(std::fabs(2.0 * 1e5 * lower_bound_337(100000, 1.0, 2.0) - 2.0) <= 1e-3);
    CHECK(std::fabs(2.0 * 1e5 * lambda_tilde(100000, 1.0, 2.0, kesten_plugin(100000)) - 2.0) <=
          1e-3);
}

TEST_CASE("bracket: degenerate grids and the budget guard") {
    BracketBudget b;
    b.replicas = 50;
    b.horizon = 3.0;
    b.L = 4;
    b.survivor_cap = 50;
    b.seed = 77;
    SUBCASE("all-zero grid never crosses") {
        McBracket br = bracket_critical(2, 1.0, 2.0, {0.0, 0.0}, b);
        CHECK(br.degenerate);
    }
    SUBCASE("strongly supercritical grid crosses at the first point") {
        McBracket br = bracket_critical(2, 1.0, 2.0, {50.0, 60.0}, b);
        CHECK(br.degenerate);  // crossing at index 0 cannot be bracketed
    }
    SUBCASE("empty grid") {
        CHECK_THROWS_AS(bracket_critical(2, 1.0, 2.0, {}, b), ParameterError);
    }
    SUBCASE("budget") {
        BracketBudget tight = b;
        tight.max_total_replicas = 10;
        CHECK_THROWS_AS(bracket_critical(2, 1.0, 2.0, {0.1, 0.2}, tight), BudgetExceeded);
    }
    SUBCASE("a real crossing is bracketed") {
        BracketBudget bb = b;
        bb.replicas = 400;
        bb.horizon = 10.0;
        McBracket br = bracket_critical(1, 1.0, 2.0, {0.05, 0.4, 3.0, 30.0}, bb);
        CHECK_FALSE(br.degenerate);
        CHECK(br.lambda_lo < br.lambda_hi);
        // one-dimensional criticality sits well above the mean-field 1/(2d)
        CHECK(br.lambda_hi > 0.5);
    }
}
