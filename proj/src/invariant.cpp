#include "tsc/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "tsc/rng.hpp"

namespace tsc {

NuSamples sample_nu(const NuSamplerConfig& cfg) {
    TorusSpec spec(cfg.d, cfg.L);
    const double per_neighbor = cfg.lambda_scaled / (2.0 * cfg.d);
    Rates rates{per_neighbor, cfg.delta, cfg.gamma};
    validate(rates, spec);
    if (cfg.samples_per_chain < 2) throw ParameterError("samples_per_chain: must be >= 2");
    if (cfg.chains < 1) throw ParameterError("chains: must be >= 1");

    NuSamples out;
    out.cfg = cfg;
    out.per_neighbor_lambda = per_neighbor;

    std::vector<double> sample_times(cfg.samples_per_chain);
    for (int k = 0; k < cfg.samples_per_chain; ++k) {
        sample_times[k] = cfg.burn_in + k * cfg.thin;
    }
    const double horizon = sample_times.back() + 1e-9;

    Configuration all2;
    for (Site s = 0; s < spec.sites(); ++s) all2.fully.insert(s);

    const int n_chains = cfg.chains;
    std::vector<std::vector<Configuration>> chain_cfgs(n_chains);
    std::vector<std::uint8_t> chain_extinct(n_chains, 0);

    auto run_chain = [&](int c) {
        CtmcSimulator sim(ProcessKind::TwoStage, spec, rates);
        SimOptions opt;
        opt.horizon = horizon;
        opt.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(c), 0xA11);
        opt.checkpoint_times = sample_times;
        std::vector<Configuration>& dst = chain_cfgs[c];
        dst.reserve(cfg.samples_per_chain);
        TrajectorySummary summary = sim.run_with_snapshots(
            all2, opt, [&](double, const std::vector<std::uint8_t>& states) {
                Configuration snap;
                for (Site s = 0; s < spec.sites(); ++s) {
                    if (states[s] == 2) snap.fully.insert(s);
                    else if (states[s] == 1) snap.semi.insert(s);
                }
                dst.push_back(std::move(snap));
            });
        if (summary.extinct && summary.extinction_time <= horizon) chain_extinct[c] = 1;
    };

    if (cfg.workers <= 1 || n_chains == 1) {
        for (int c = 0; c < n_chains; ++c) run_chain(c);
    } else {
        std::vector<std::thread> pool;
        int nw = std::min(cfg.workers, n_chains);
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back([&, w]() {
                for (int c = w; c < n_chains; c += nw) run_chain(c);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (int c = 0; c < n_chains; ++c) {
        if (chain_extinct[c]) {
            throw ExtinctionDuringSampling(
                "sample_nu: chain " + std::to_string(c) +
                " died before the last sample (subcritical rates or undersized torus)");
        }
    }

    const double n_sites = static_cast<double>(spec.sites());
    double first = 0.0, second = 0.0;
    std::int64_t n_first = 0, n_second = 0;
    for (int c = 0; c < n_chains; ++c) {
        double occ = 0.0;
        for (int k = 0; k < cfg.samples_per_chain; ++k) {
            const Configuration& conf = chain_cfgs[c][k];
            double o = static_cast<double>(conf.infected_count()) / n_sites;
            occ += o;
            if (k < cfg.samples_per_chain / 2) {
                first += o;
                ++n_first;
            } else {
                second += o;
                ++n_second;
            }
        }
        out.chain_occupancy.push_back(occ / cfg.samples_per_chain);
        for (auto& conf : chain_cfgs[c]) out.configs.push_back(std::move(conf));
    }
    MeanEstimate chain_mean = mean_estimate(out.chain_occupancy);
    out.occupancy = chain_mean.mean;
    out.occupancy_se = chain_mean.std_error;
    out.occ_first_half = first / std::max<std::int64_t>(1, n_first);
    out.occ_second_half = second / std::max<std::int64_t>(1, n_second);
    double gate_se = out.occupancy_se > 0.0 ? out.occupancy_se : 1.0 / n_sites;
    out.stationary =
        std::fabs(out.occ_first_half - out.occ_second_half) <= 2.0 * std::sqrt(2.0) * gate_se;
    return out;
}

namespace {

// Dense per-sample state arrays plus the list of pattern translates. The
// measure is translation invariant, so averaging the event indicator over
// every translate of (A, B) estimates the same pi(A, B) at a fraction of the
// variance of any single placement.
std::vector<std::vector<std::uint8_t>> dense_states(const NuSamples& samples,
                                                    const TorusSpec& spec) {
    std::vector<std::vector<std::uint8_t>> states;
    states.reserve(samples.configs.size());
    for (const Configuration& conf : samples.configs) {
        std::vector<std::uint8_t> st(spec.sites(), 0);
        for (Site s : conf.fully) st[s] = 2;
        for (Site s : conf.semi) st[s] = 1;
        states.push_back(std::move(st));
    }
    return states;
}

std::vector<Site> translate_sites(const TorusSpec& spec, const std::vector<Site>& sites,
                                  Site shift_by) {
    std::vector<int> v = spec.coords(shift_by);
    std::vector<Site> out;
    out.reserve(sites.size());
    for (Site s : sites) {
        std::vector<int> c = spec.coords(s);
        for (int k = 0; k < spec.d(); ++k) c[k] += v[k];
        out.push_back(spec.encode(c));
    }
    return out;
}

// Chain-blocked estimate of a translate-averaged event frequency.
EstimateWithCI translate_averaged_event(
    const NuSamples& samples, const TorusSpec& spec, const std::vector<Site>& A,
    const std::vector<Site>& B,
    const std::function<bool(const std::vector<std::uint8_t>&, const std::vector<Site>&,
                             const std::vector<Site>&)>& event) {
    const int chains = samples.cfg.chains;
    const int per = samples.cfg.samples_per_chain;
    auto states = dense_states(samples, spec);

    std::vector<double> chain_means(chains, 0.0);
    double total = 0.0;
    for (Site v = 0; v < spec.sites(); ++v) {
        std::vector<Site> At = translate_sites(spec, A, v);
        std::vector<Site> Bt = translate_sites(spec, B, v);
        for (int c = 0; c < chains; ++c) {
            std::int64_t h = 0;
            for (int k = 0; k < per; ++k) {
                h += event(states[c * per + k], At, Bt) ? 1 : 0;
            }
            chain_means[c] += static_cast<double>(h) / per;
            total += static_cast<double>(h);
        }
    }
    const double n_translates = static_cast<double>(spec.sites());
    for (double& m : chain_means) m /= n_translates;
    MeanEstimate m = mean_estimate(chain_means);
    EstimateWithCI e;
    e.point = total / (n_translates * chains * per);
    e.std_error = m.std_error;
    e.replicas = static_cast<std::int64_t>(chains) * per;
    e.seed = samples.cfg.seed;
    return e;
}

}  // namespace

EstimateWithCI estimate_pi(const NuSamples& samples, const PiQuery& query) {
    for (Site a : query.A) {
        for (Site b : query.B) {
            if (a == b) throw OverlapError("pi query: A and B overlap");
        }
    }
    if (query.A.empty() && query.B.empty()) {
        EstimateWithCI e;
        e.point = 1.0;
        e.std_error = 0.0;
        e.replicas = static_cast<std::int64_t>(samples.configs.size());
        e.seed = samples.cfg.seed;
        return e;
    }
    TorusSpec spec(samples.cfg.d, samples.cfg.L);
    return translate_averaged_event(
        samples, spec, query.A, query.B,
        [](const std::vector<std::uint8_t>& st, const std::vector<Site>& A,
           const std::vector<Site>& B) {
            for (Site x : A) {
                if (st[x] == 2) return false;
            }
            for (Site y : B) {
                if (st[y] != 0) return false;
            }
            return true;
        });
}

ProductPrediction product_prediction(double lambda_scaled, double delta, double gamma) {
    const double s = 1.0 + delta + gamma;
    ProductPrediction p;
    p.p0 = s / (lambda_scaled * gamma);
    p.p2 = (lambda_scaled * gamma - s) / (lambda_scaled * (gamma + 1.0));
    p.p1 = (lambda_scaled * gamma - s) / (lambda_scaled * gamma * (gamma + 1.0));
    return p;
}

std::vector<Site> clustered_set(const TorusSpec& spec, int size, Site anchor) {
    // Sites in increasing wraparound-l1 distance from the anchor, ties by
    // index: a compact blob.
    std::vector<Site> all(spec.sites());
    for (Site s = 0; s < spec.sites(); ++s) all[s] = s;
    std::stable_sort(all.begin(), all.end(), [&](Site a, Site b) {
        return spec.l1(a, anchor) < spec.l1(b, anchor);
    });
    all.resize(size);
    return all;
}

std::optional<std::vector<Site>> spread_set(const TorusSpec& spec, int size, int min_dist,
                                            const std::vector<Site>& avoid) {
    std::vector<Site> chosen;
    for (Site s = 0; s < spec.sites() && static_cast<int>(chosen.size()) < size; ++s) {
        bool ok = true;
        for (Site c : chosen) {
            if (spec.l1(s, c) < min_dist) {
                ok = false;
                break;
            }
        }
        for (Site c : avoid) {
            if (s == c) ok = false;
        }
        if (ok) chosen.push_back(s);
    }
    if (static_cast<int>(chosen.size()) < size) return std::nullopt;
    return chosen;
}

std::vector<GapRow> product_gap(const NuSamples& samples,
                                const std::vector<std::pair<int, int>>& mn_pairs) {
    TorusSpec spec(samples.cfg.d, samples.cfg.L);
    ProductPrediction pred =
        product_prediction(samples.cfg.lambda_scaled, samples.cfg.delta, samples.cfg.gamma);

    // Anchor B away from A's anchor.
    std::vector<int> far(spec.d(), 0);
    for (int k = 0; k < spec.d(); ++k) far[k] = spec.L() / 2;
    const Site far_site = spec.encode(far);

    std::vector<GapRow> rows;
    for (auto [m, n] : mn_pairs) {
        auto emit = [&](const std::string& family, const std::vector<Site>& A,
                        const std::vector<Site>& B, bool feasible) {
            GapRow r;
            r.family = family;
            r.m = m;
            r.n = n;
            r.feasible = feasible;
            if (feasible) {
                EstimateWithCI est = estimate_pi(samples, PiQuery{A, B});
                r.estimate = est.point;
                r.se = est.std_error;
            }
            r.prediction = std::pow(1.0 - pred.p2, m) * std::pow(pred.p0, n);
            r.gap = feasible ? std::fabs(r.estimate - r.prediction) : 0.0;
            rows.push_back(r);
        };

        // clustered: one compact blob split between A and B
        {
            std::vector<Site> blob = clustered_set(spec, m + n, spec.origin());
            std::vector<Site> A(blob.begin(), blob.begin() + m);
            std::vector<Site> B(blob.begin() + m, blob.end());
            emit("clustered", A, B, true);
        }
        // spread: pairwise distance >= 3 within and across the sets
        {
            auto all = spread_set(spec, m + n, 3, {});
            if (all.has_value()) {
                std::vector<Site> A(all->begin(), all->begin() + m);
                std::vector<Site> B(all->begin() + m, all->end());
                emit("spread", A, B, true);
            } else {
                emit("spread", {}, {}, false);
            }
        }
        // mixed: A compact at the origin, B compact at the far corner
        {
            std::vector<Site> A = clustered_set(spec, m, spec.origin());
            std::vector<Site> B;
            for (Site s : clustered_set(spec, m + n, far_site)) {
                if (static_cast<int>(B.size()) == n) break;
                bool in_a = false;
                for (Site a : A) in_a |= a == s;
                if (!in_a) B.push_back(s);
            }
            emit("mixed", A, B, static_cast<int>(B.size()) == n);
        }
    }
    return rows;
}

EstimateWithCI dual_pi(const PiQuery& query, int d, int L, double delta, double gamma,
                       double lambda_scaled, double horizon, std::int64_t replicas,
                       std::uint64_t seed, std::int64_t survivor_cap, int workers) {
    TorusSpec spec(d, L);
    Rates rates{lambda_scaled / (2.0 * d), delta, gamma};
    Configuration initial;
    for (Site s : query.B) initial.fully.insert(s);
    for (Site s : query.A) initial.semi.insert(s);
    SurvivalEstimate est = estimate_survival(ProcessKind::OnOff, spec, rates, initial,
                                             horizon, replicas, seed, survivor_cap, workers);
    EstimateWithCI out;
    out.point = 1.0 - est.point;
    out.std_error = est.std_error;
    out.replicas = est.replicas;
    out.seed = seed;
    return out;
}

SixParts six_bounds(std::int64_t M, std::int64_t n, std::int64_t m, int d, double delta,
                    double gamma, double lambda_scaled, double b_tilde_estimate) {
    if (M <= n + m) throw ParameterError("M: must exceed n + m");
    SixParts out;
    out.p = std::exp(-(1.0 + delta)) * (1.0 - std::exp(-gamma));
    out.mu = static_cast<std::int64_t>(std::ceil(M * out.p / 2.0));
    out.alpha_tilde = binomial_tail_geq(M, out.p, out.mu);
    const double s = 1.0 + delta + gamma;
    if (lambda_scaled * gamma > s && n >= 1) {
        double denom_term = 2.0 * (gamma + 1.0) / (gamma - s / lambda_scaled);
        out.occupancy_lower_bound = static_cast<double>(n) / (denom_term + (n - 1.0));
    }
    const double lambda_eff = (2.0 * d - M) / (2.0 * d) * lambda_scaled;
    out.branching_factor = lambda_eff > 0.0
                               ? survival_closed_form(n, m, lambda_eff, delta, gamma)
                               : 0.0;
    out.b_tilde_estimate = b_tilde_estimate;
    out.composite = out.branching_factor * out.alpha_tilde * b_tilde_estimate;
    return out;
}

BcTildeEstimate b_tilde_from_samples(const NuSamples& samples, int size) {
    TorusSpec spec(samples.cfg.d, samples.cfg.L);
    BcTildeEstimate out;
    out.value = 1.0;

    auto occupancy_of = [&](const std::vector<Site>& A) -> std::pair<double, double> {
        EstimateWithCI e = translate_averaged_event(
            samples, spec, A, {},
            [](const std::vector<std::uint8_t>& st, const std::vector<Site>& At,
               const std::vector<Site>&) {
                for (Site s : At) {
                    if (st[s] != 0) return true;
                }
                return false;
            });
        return {e.point, e.std_error};
    };

    std::vector<std::vector<Site>> family;
    family.push_back(clustered_set(spec, size, spec.origin()));
    auto spread = spread_set(spec, size, 3, {});
    if (spread.has_value()) {
        family.push_back(*spread);
    } else {
        out.spread_feasible = false;
    }
    {
        std::vector<int> far(spec.d(), 0);
        far[0] = spec.L() / 2;
        family.push_back(clustered_set(spec, size, spec.encode(far)));
    }
    for (const auto& A : family) {
        auto [v, se] = occupancy_of(A);
        if (v < out.value) {
            out.value = v;
            out.se = se;
        }
    }
    return out;
}

}  // namespace tsc
