#include <doctest.h>

#include <cmath>
#include <vector>

#include "tsc/markov.hpp"
#include "tsc/rng.hpp"
#include "tsc/stats.hpp"

using namespace tsc;

namespace {

Configuration config_of(std::initializer_list<Site> fully, std::initializer_list<Site> semi) {
    Configuration c;
    for (Site s : fully) c.fully.insert(s);
    for (Site s : semi) c.semi.insert(s);
    return c;
}

// Dense Taylor-with-scaling matrix exponential on the full state space; the
// independent oracle for the uniformization path.
std::vector<double> dense_expm_row(const SparseCsr& Q, std::size_t n, std::size_t start,
                                   double t) {
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    // extract dense Q^T columns through apply on unit vectors
    std::vector<double> e(n, 0.0), col(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        Q.apply(e, col);  // col = Q * e_j, i.e. column j of Q
        for (std::size_t i = 0; i < n; ++i) A[i][j] = col[i];
    }
    // scale
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j) r += std::fabs(A[i][j]);
        norm = std::max(norm, r);
    }
    int squarings = 0;
    double scale = norm * t;
    while (scale > 0.5) {
        scale /= 2.0;
        ++squarings;
    }
    double h = t / std::pow(2.0, squarings);
    // E = exp(A h) by Taylor
    std::vector<std::vector<double>> E(n, std::vector<double>(n, 0.0)),
        term(n, std::vector<double>(n, 0.0)), tmp(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        E[i][i] = 1.0;
        term[i][i] = 1.0;
    }
    for (int k = 1; k <= 40; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < n; ++l) acc += term[i][l] * A[l][j];
                tmp[i][j] = acc * h / k;
            }
        }
        term.swap(tmp);
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                E[i][j] += term[i][j];
                mx = std::max(mx, std::fabs(term[i][j]));
            }
        }
        if (mx < 1e-18) break;
    }
    for (int sq = 0; sq < squarings; ++sq) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < n; ++l) acc += E[i][l] * E[l][j];
                tmp[i][j] = acc;
            }
        }
        E.swap(tmp);
    }
    std::vector<double> row(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) row[j] = E[start][j];
    return row;
}

}  // namespace

TEST_CASE("total_rate matches the generator's rate table") {
    SUBCASE("two-stage, single fully infected") {
        TorusSpec spec(2, 5);
        Rates r{3.0, 1.0, 2.0};
        auto rd = total_rate(ProcessKind::TwoStage, config_of({spec.origin()}, {}), spec, r);
        CHECK(rd.total == doctest::Approx(13.0));  // 1 death + 4 * 3 infection
    }
    SUBCASE("two-stage, single semi infected") {
        TorusSpec spec(2, 5);
        Rates r{3.0, 1.0, 2.0};
        auto rd = total_rate(ProcessKind::TwoStage, config_of({}, {spec.origin()}), spec, r);
        CHECK(rd.total == doctest::Approx(4.0));  // (1+delta) + gamma
    }
    SUBCASE("on-off, single fully infected on the 3-ring") {
        TorusSpec spec(1, 3);
        Rates r{3.0, 1.0, 2.0};
        auto rd = total_rate(ProcessKind::OnOff, config_of({spec.origin()}, {}), spec, r);
        CHECK(rd.total == doctest::Approx(8.0));  // 1 + delta + 2*3
    }
}

TEST_CASE("simulator rates agree with the exact generator diagonal") {
    // The dense generator enumerates events over base-3 codes; total_rate
    // walks sparse sets. Their totals must match on random configurations.
    TorusSpec spec(1, 6);
    Rates r{0.7, 1.3, 2.1};
    Engine eng = make_engine(42);
    for (ProcessKind kind : {ProcessKind::TwoStage, ProcessKind::OnOff}) {
        SparseCsr Q = build_generator(kind, spec, r);
        for (int trial = 0; trial < 20; ++trial) {
            Configuration c;
            std::int64_t code = 0, p3 = 1;
            for (Site s = 0; s < spec.sites(); ++s) {
                int st = static_cast<int>(eng() % 3);
                if (st == 2) c.fully.insert(s);
                if (st == 1) c.semi.insert(s);
                code += p3 * st;
                p3 *= 3;
            }
            auto rd = total_rate(kind, c, spec, r);
            // diagonal of Q at this state
            std::vector<double> e(Q.rows(), 0.0), out(Q.rows(), 0.0);
            e[code] = 1.0;
            Q.apply_transpose(e, out);
            CHECK(out[code] == doctest::Approx(-rd.total).epsilon(1e-12));
        }
    }
}

TEST_CASE("empty initial configuration is extinct at t=0") {
    TorusSpec spec(2, 5);
    Rates r{1.0, 1.0, 2.0};
    SimOptions opt;
    opt.horizon = 5.0;
    opt.seed = 9;
    auto traj = simulate(ProcessKind::TwoStage, spec, r, Configuration{}, opt);
    CHECK(traj.extinct);
    CHECK(traj.extinction_time == 0.0);
}

TEST_CASE("lambda=0 single site dies at an Exp(1) time") {
    TorusSpec spec(1, 5);
    Rates r{0.0, 1.0, 2.0};
    const std::int64_t n = 20000;
    std::vector<double> times;
    CtmcSimulator sim(ProcessKind::TwoStage, spec, r);
    SimOptions opt;
    opt.horizon = 200.0;
    for (std::int64_t i = 0; i < n; ++i) {
        opt.seed = mix_seed(11, static_cast<std::uint64_t>(i));
        auto traj = sim.run(config_of({spec.origin()}, {}), opt);
        REQUIRE(traj.extinct);
        times.push_back(traj.extinction_time);
    }
    MeanEstimate m = mean_estimate(times);
    CHECK(std::fabs(m.mean - 1.0) <= 3.0 * m.std_error);
}

TEST_CASE("promotion beats death with probability gamma/(1+delta+gamma)") {
    TorusSpec spec(1, 5);
    Rates r{0.0, 1.0, 2.0};
    const std::int64_t n = 20000;
    std::int64_t promoted = 0;
    CtmcSimulator sim(ProcessKind::TwoStage, spec, r);
    SimOptions opt;
    opt.horizon = 200.0;
    for (std::int64_t i = 0; i < n; ++i) {
        opt.seed = mix_seed(13, static_cast<std::uint64_t>(i));
        auto traj = sim.run(config_of({}, {spec.origin()}), opt);
        promoted += traj.peak_fully > 0 ? 1 : 0;
    }
    auto est = binomial_estimate(promoted, n, 13);
    CHECK(std::fabs(est.point - 0.5) <= 3.0 * est.std_error);
}

TEST_CASE("estimate_survival: extremes") {
    TorusSpec spec(2, 5);
    SUBCASE("pure death") {
        Rates r{1e-9, 1.0, 2.0};
        auto est = estimate_survival(ProcessKind::TwoStage, spec, r,
                                     config_of({spec.origin()}, {}), 30.0, 2000, 5);
        CHECK(est.point <= 0.005);
    }
    SUBCASE("strong infection survives") {
        Rates r{50.0, 1.0, 2.0};
        auto est = estimate_survival(ProcessKind::TwoStage, spec, r,
                                     config_of({spec.origin()}, {}), 10.0, 2000, 5, 200);
        CHECK(est.point >= 0.9);
    }
    SUBCASE("replica validation") {
        Rates r{1.0, 1.0, 2.0};
        CHECK_THROWS_AS(estimate_survival(ProcessKind::TwoStage, spec, r,
                                          config_of({spec.origin()}, {}), 1.0, 0, 5),
                        ParameterError);
    }
}

TEST_CASE("exact distribution: point mass at t=0 and generator validity") {
    TorusSpec spec(1, 3);
    Rates r{3.0, 1.0, 2.0};
    Configuration init = config_of({0}, {2});
    auto dist = exact_distribution(ProcessKind::TwoStage, spec, r, init, 0.0);
    // state code: site0=2, site2=1 -> 2*1 + 1*9 = 11
    for (std::size_t code = 0; code < dist.prob.size(); ++code) {
        CHECK(dist.prob[code] == doctest::Approx(code == 11 ? 1.0 : 0.0));
    }

    SparseCsr Q = build_generator(ProcessKind::TwoStage, spec, r);
    std::vector<double> ones(Q.rows(), 1.0), rowsum(Q.rows(), 0.0);
    Q.apply(ones, rowsum);  // row sums of the generator must vanish
    for (double v : rowsum) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("exact distribution matches a dense Taylor expm oracle") {
    TorusSpec spec(1, 3);
    Rates r{1.5, 0.7, 2.2};
    Configuration init = config_of({0}, {});
    double t = 0.8;
    auto dist = exact_distribution(ProcessKind::OnOff, spec, r, init, t);
    SparseCsr Q = build_generator(ProcessKind::OnOff, spec, r);
    auto oracle = dense_expm_row(Q, dist.prob.size(), 2 /*code of fully at site 0*/, t);
    double sum = 0.0;
    for (std::size_t i = 0; i < dist.prob.size(); ++i) {
        CHECK(std::fabs(dist.prob[i] - oracle[i]) <= 1e-10);
        sum += dist.prob[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
}

TEST_CASE("duality on the 3-ring: specific quadruple") {
    // A={0}, B={}, C={1}, D={}, t=0.5
    TorusSpec spec(1, 3);
    Rates r{3.0, 1.0, 2.0};
    double t = 0.5;
    auto eta = exact_distribution(ProcessKind::TwoStage, spec, r, config_of({1}, {}), t);
    double lhs = hit_event_probability(eta, {0}, {});
    auto xi = exact_distribution(ProcessKind::OnOff, spec, r, config_of({}, {0}), t);
    double rhs = hit_event_probability(xi, {}, {1});
    CHECK(std::fabs(lhs - rhs) <= 1e-10);
}

TEST_CASE("first-jump identities and submodular survival inequalities") {
    // Estimator-level checks on a d=2 torus: q1 = (2dl/(2dl+1)) k1,
    // alpha = gamma/(1+delta+gamma) q1, k2 <= 2k1 - q1, q3 <= k1 + q2 - q1.
    TorusSpec spec(2, 7);
    Rates r{0.8, 1.0, 2.0};
    const double T = 20.0;
    const std::int64_t n = 10000;
    const std::int64_t cap = 300;
    Site O = spec.origin();
    Site e1 = spec.shift(O, 0, +1);
    Site e2 = spec.shift(O, 1, +1);
    Site me1 = spec.shift(O, 0, -1);

    auto surv = [&](const Configuration& init, std::uint64_t salt) {
        return estimate_survival(ProcessKind::TwoStage, spec, r, init, T, n,
                                 mix_seed(1234, salt), cap);
    };
    auto q1 = surv(config_of({O}, {}), 1);
    auto k1 = surv(config_of({O}, {e1}), 2);
    auto alpha = surv(config_of({}, {O}), 3);
    auto k2a = surv(config_of({O}, {e1, e2}), 4);
    auto k2b = surv(config_of({O}, {e1, me1}), 5);
    auto q2 = surv(config_of({O, e1}, {}), 6);
    auto q3a = surv(config_of({O, e1}, {e2}), 7);
    auto q3b = surv(config_of({O, e1}, {me1}), 8);

    const double c32 = 2.0 * 2 * r.lambda / (2.0 * 2 * r.lambda + 1.0);
    CHECK(std::fabs(q1.point - c32 * k1.point) <=
          3.0 * combined_se(q1.std_error, c32 * k1.std_error));
    const double c33 = r.gamma / (1.0 + r.delta + r.gamma);
    CHECK(std::fabs(alpha.point - c33 * q1.point) <=
          3.0 * combined_se(alpha.std_error, c33 * q1.std_error));

    double k2 = std::max(k2a.point, k2b.point);
    double se_k2 = std::max(k2a.std_error, k2b.std_error);
    CHECK(k2 <= 2.0 * k1.point - q1.point +
                    3.0 * (se_k2 + combined_se(2.0 * k1.std_error, q1.std_error)));
    double q3 = std::max(q3a.point, q3b.point);
    double se_q3 = std::max(q3a.std_error, q3b.std_error);
    CHECK(q3 <= k1.point + q2.point - q1.point +
                    3.0 * (se_q3 +
                           combined_se(combined_se(k1.std_error, q2.std_error), q1.std_error)));
}

TEST_CASE("size guard on the exact oracle") {
    TorusSpec spec(2, 3);  // 9 sites > 8
    Rates r{1.0, 1.0, 2.0};
    CHECK_THROWS_AS(exact_distribution(ProcessKind::TwoStage, spec, r, Configuration{}, 1.0),
                    SizeError);
}

TEST_CASE("simulate is deterministic in the seed") {
    TorusSpec spec(2, 5);
    Rates r{1.0, 1.0, 2.0};
    SimOptions opt;
    opt.horizon = 5.0;
    opt.seed = 321;
    opt.checkpoint_times = {1.0, 2.0, 5.0};
    auto a = simulate(ProcessKind::TwoStage, spec, r, config_of({spec.origin()}, {}), opt);
    auto b = simulate(ProcessKind::TwoStage, spec, r, config_of({spec.origin()}, {}), opt);
    CHECK(a.extinct == b.extinct);
    CHECK(a.extinction_time == b.extinction_time);
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        CHECK(a.checkpoints[i].n_fully == b.checkpoints[i].n_fully);
        CHECK(a.checkpoints[i].n_semi == b.checkpoints[i].n_semi);
    }
}

TEST_CASE("simulated state law matches the exact distribution") {
    // Frequency of every state code at t from replicas vs the uniformized
    // exponential, a law-level cross-check of two independent routes.
    TorusSpec spec(1, 3);
    Rates r{1.2, 1.0, 2.0};
    const double t = 0.7;
    const std::int64_t n = 30000;
    Configuration init = config_of({0}, {2});
    auto exact = exact_distribution(ProcessKind::TwoStage, spec, r, init, t);

    std::vector<std::int64_t> counts(exact.prob.size(), 0);
    CtmcSimulator sim(ProcessKind::TwoStage, spec, r);
    SimOptions so;
    so.horizon = t;
    so.checkpoint_times = {t};
    for (std::int64_t i = 0; i < n; ++i) {
        so.seed = mix_seed(8844, static_cast<std::uint64_t>(i));
        std::int64_t code = -1;
        sim.run_with_snapshots(init, so, [&](double, const std::vector<std::uint8_t>& st) {
            std::int64_t c = 0, p3 = 1;
            for (Site s = 0; s < spec.sites(); ++s) {
                c += p3 * st[s];
                p3 *= 3;
            }
            code = c;
        });
        REQUIRE(code >= 0);
        ++counts[code];
    }
    for (std::size_t code = 0; code < exact.prob.size(); ++code) {
        double phat = static_cast<double>(counts[code]) / n;
        double se = std::sqrt(std::max(exact.prob[code] * (1.0 - exact.prob[code]), 1e-12) / n);
        CHECK(std::fabs(phat - exact.prob[code]) <= 4.0 * se + 5e-4);
    }
}

TEST_CASE("survival estimates are independent of the worker count") {
    TorusSpec spec(2, 5);
    Rates r{0.9, 1.0, 2.0};
    Configuration init;
    init.fully.insert(spec.origin());
    auto one = estimate_survival(ProcessKind::TwoStage, spec, r, init, 6.0, 2000, 99, 200, 1);
    auto three = estimate_survival(ProcessKind::TwoStage, spec, r, init, 6.0, 2000, 99, 200, 3);
    CHECK(one.survivors == three.survivors);
    CHECK(one.point == three.point);
}

TEST_CASE("a reused simulator replays a seed exactly like a fresh one") {
    TorusSpec spec(2, 5);
    Rates r{1.1, 1.0, 2.0};
    Configuration init;
    init.fully.insert(spec.origin());
    SimOptions opt;
    opt.horizon = 4.0;
    opt.seed = 4242;

    CtmcSimulator reused(ProcessKind::TwoStage, spec, r);
    for (int i = 0; i < 5; ++i) {
        SimOptions other = opt;
        other.seed = mix_seed(1, i);
        reused.run(init, other);  // dirty the internal arrays
    }
    auto a = reused.run(init, opt);
    auto b = simulate(ProcessKind::TwoStage, spec, r, init, opt);
    CHECK(a.extinct == b.extinct);
    CHECK(a.extinction_time == b.extinction_time);
    CHECK(a.final_fully == b.final_fully);
    CHECK(a.final_semi == b.final_semi);
}
