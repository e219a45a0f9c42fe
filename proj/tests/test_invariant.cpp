#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tsc/invariant.hpp"
#include "tsc/rng.hpp"

using namespace tsc;

namespace {

struct Fraction {
    long long num, den;
    Fraction(long long n, long long d) : num(n), den(d) { reduce(); }
    void reduce() {
        long long g = std::gcd(std::llabs(num), std::llabs(den));
        if (g) {
            num /= g;
            den /= g;
        }
        if (den < 0) {
            num = -num;
            den = -den;
        }
    }
    Fraction operator+(const Fraction& o) const {
        return Fraction(num * o.den + o.num * den, den * o.den);
    }
    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }
};

NuSamplerConfig quick_cfg(int d, double lambda_scaled, std::uint64_t seed) {
    NuSamplerConfig cfg;
    cfg.d = d;
    cfg.L = 3;
    cfg.delta = 1.0;
    cfg.gamma = 2.0;
    cfg.lambda_scaled = lambda_scaled;
    cfg.burn_in = 20.0;
    cfg.thin = 0.5;
    cfg.samples_per_chain = 60;
    cfg.chains = 4;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("product prediction: plug-in values and exact rational sum") {
    ProductPrediction p = product_prediction(8.0, 1.0, 2.0);
    CHECK(p.p0 == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.p2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.p1 == doctest::Approx(0.25).epsilon(1e-12));

    // exact rational identity p0 + p1 + p2 = 1 for rational inputs:
    // lambda = 8, delta = 1, gamma = 2, s = 4
    Fraction p0(4, 16), p2(12, 24), p1(12, 48);
    CHECK(p0 + p1 + p2 == Fraction(1, 1));

    // a second rational instance: lambda = 7/2, delta = 1/2, gamma = 3, s = 9/2
    // p0 = s/(l g) = (9/2)/(21/2) = 9/21; p2 = (l g - s)/(l (g+1)) = 6/14*...
    // l g - s = 21/2 - 9/2 = 6; l(g+1) = 14; l g (g+1) = 42
    Fraction q0(9, 21), q2(6, 14), q1(6, 42);
    CHECK(q0 + q1 + q2 == Fraction(1, 1));
}

TEST_CASE("sampling the quasi-stationary law") {
    SUBCASE("subcritical rates die out") {
        CHECK_THROWS_AS(sample_nu(quick_cfg(2, 0.5, 9)), ExtinctionDuringSampling);
    }
    SUBCASE("supercritical sampling is stationary and occupied") {
        NuSamples s = sample_nu(quick_cfg(3, 8.0, 10));
        CHECK(s.configs.size() == 240);
        CHECK(s.occupancy > 0.2);
        CHECK(s.occupancy < 1.0);
        CHECK(s.stationary);
        // vacuous query
        EstimateWithCI e = estimate_pi(s, PiQuery{{}, {}});
        CHECK(e.point == 1.0);
    }
}

TEST_CASE("occupancy increases with lambda") {
    NuSamples lo = sample_nu(quick_cfg(3, 6.0, 13));
    NuSamples hi = sample_nu(quick_cfg(3, 10.0, 14));
    CHECK(lo.occupancy <=
          hi.occupancy + 2.0 * combined_se(lo.occupancy_se, hi.occupancy_se));
}

TEST_CASE("dual and direct estimators of pi agree") {
    NuSamples s = sample_nu(quick_cfg(3, 8.0, 21));
    TorusSpec spec(3, 3);
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {1, 1}}) {
        std::vector<Site> blob = clustered_set(spec, m + n, spec.origin());
        PiQuery q{std::vector<Site>(blob.begin(), blob.begin() + m),
                  std::vector<Site>(blob.begin() + m, blob.end())};
        EstimateWithCI direct = estimate_pi(s, q);
        EstimateWithCI dual = dual_pi(q, 3, 3, 1.0, 2.0, 8.0, 25.0, 20000,
                                      mix_seed(303, m, n), 300);
        double cse = combined_se(direct.std_error, dual.std_error);
        CHECK(std::fabs(direct.point - dual.point) <= 3.0 * cse + 0.01);
    }
}

TEST_CASE("branching survival dominates 1 - pi") {
    NuSamples s = sample_nu(quick_cfg(3, 8.0, 33));
    TorusSpec spec(3, 3);
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 0}, {0, 1}, {1, 1}}) {
        std::vector<Site> blob = clustered_set(spec, m + n, spec.origin());
        PiQuery q{std::vector<Site>(blob.begin(), blob.begin() + m),
                  std::vector<Site>(blob.begin() + m, blob.end())};
        EstimateWithCI direct = estimate_pi(s, q);
        double bound = survival_closed_form(n, m, 8.0, 1.0, 2.0);
        CHECK(1.0 - direct.point <= bound + 3.0 * direct.std_error + 0.01);
    }
}

TEST_CASE("product gap rows and family feasibility") {
    NuSamples s = sample_nu(quick_cfg(4, 8.0, 55));
    auto rows = product_gap(s, {{1, 0}, {0, 1}, {1, 1}});
    CHECK(rows.size() == 9);  // three families per (m,n)
    for (const auto& r : rows) {
        CHECK(r.feasible);  // every family fits on the d=4 torus
        CHECK(r.estimate >= 0.0);
        CHECK(r.estimate <= 1.0);
        CHECK(r.gap == doctest::Approx(std::fabs(r.estimate - r.prediction)));
    }
    // spread sets with pairwise distance >= 3 exist on the d=4, L=3 torus for
    // two sites (opposite parity patterns)
    TorusSpec spec(4, 3);
    auto sp = spread_set(spec, 2, 3, {});
    CHECK(sp.has_value());
    CHECK(spec.l1((*sp)[0], (*sp)[1]) >= 3);
    // but a 1d ring of 3 cannot hold two sites at distance 3
    TorusSpec ring(1, 3);
    CHECK_FALSE(spread_set(ring, 2, 3, {}).has_value());
}

TEST_CASE("six-bounds exact pieces") {
    SixParts sp = six_bounds(100, 1, 0, 4, 1.0, 2.0, 8.0, 0.5);
    CHECK(std::fabs(sp.p - 0.117019) <= 1e-6);
    CHECK(sp.mu == 6);
    CHECK(sp.alpha_tilde > 0.0);
    CHECK(sp.alpha_tilde <= 1.0);
    // at n=1, lambda=8, gamma=2, delta=1: 1/(2*3/(2-0.5)) = 1/4
    CHECK(sp.occupancy_lower_bound == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS_AS(six_bounds(1, 1, 0, 4, 1.0, 2.0, 8.0, 0.5), ParameterError);

    // alpha_tilde is nondecreasing to 1 over M
    double prev = 0.0;
    for (std::int64_t M : {100, 1000, 10000}) {
        SixParts sm = six_bounds(M, 1, 0, 10000, 1.0, 2.0, 8.0, 0.5);
        CHECK(sm.alpha_tilde >= prev - 1e-12);
        prev = sm.alpha_tilde;
    }
    CHECK(prev >= 0.999);
}

TEST_CASE("alpha-tilde matches a Monte Carlo of the i.i.d. scheme") {
    const std::int64_t M = 50;
    const double p = std::exp(-2.0) * (1.0 - std::exp(-2.0));
    const double thresh = M * p / 2.0;
    Engine eng = make_engine(7171);
    const int n = 100000;
    std::int64_t hits = 0;
    for (int i = 0; i < n; ++i) {
        int count = 0;
        for (int j = 0; j < M; ++j) count += uniform01(eng) < p ? 1 : 0;
        hits += count >= thresh ? 1 : 0;
    }
    auto mc = binomial_estimate(hits, n, 7171);
    double exact = binomial_tail_geq(M, p, static_cast<std::int64_t>(std::ceil(thresh)));
    CHECK(std::fabs(mc.point - exact) <= 3.0 * mc.std_error);
}

TEST_CASE("the occupancy floor sits below the occupancy estimate") {
    NuSamples s = sample_nu(quick_cfg(4, 8.0, 99));
    SixParts sp = six_bounds(7, 1, 0, 4, 1.0, 2.0, 8.0, 1.0);
    CHECK(sp.occupancy_lower_bound <= s.occupancy + 3.0 * s.occupancy_se);
}

TEST_CASE("reaching M is at least as likely as reduced-rate branching survival") {
    // on-off from one fully-infected site, per-neighbor rate lambda/2d;
    // P(|I| reaches M) >= closed form with lambda -> (2d-M)/(2d) lambda.
    const int d = 4;
    const double lambda_scaled = 8.0;
    const std::int64_t M = 5;
    TorusSpec spec(d, 3);
    Rates r{lambda_scaled / (2.0 * d), 1.0, 2.0};
    Configuration init;
    init.fully.insert(spec.origin());
    auto est = estimate_survival(ProcessKind::OnOff, spec, r, init, 60.0, 20000, 616, M);
    double bound =
        survival_closed_form(1, 0, (2.0 * d - M) / (2.0 * d) * lambda_scaled, 1.0, 2.0);
    CHECK(est.point >= bound - 3.0 * est.std_error);
}

TEST_CASE("b-tilde family minimum") {
    NuSamples s = sample_nu(quick_cfg(4, 8.0, 111));
    BcTildeEstimate bt = b_tilde_from_samples(s, 2);
    CHECK(bt.value > 0.0);
    CHECK(bt.value <= 1.0);
    SixParts sp = six_bounds(7, 1, 0, 4, 1.0, 2.0, 8.0, bt.value);
    CHECK(sp.composite <= 1.0);
    CHECK(sp.composite >= 0.0);
}

TEST_CASE("large lambda pushes the healthy-site fraction to p0") {
    NuSamplerConfig cfg = quick_cfg(6, 40.0, 321);
    cfg.burn_in = 15.0;
    cfg.samples_per_chain = 40;
    NuSamples s = sample_nu(cfg);
    ProductPrediction p = product_prediction(40.0, 1.0, 2.0);  // p0 = 0.05
    double healthy = 1.0 - s.occupancy;
    CHECK(std::fabs(healthy - p.p0) <= 0.04);
}
