#include "tsc/markov.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tsc/rng.hpp"

namespace tsc {

RateDecomposition total_rate(ProcessKind kind, const Configuration& config,
                             const TorusSpec& spec, const Rates& rates) {
    config.check_disjoint();
    RateDecomposition out;
    Event buf[3];
    std::vector<Site> nbrs, inner;

    auto add_site = [&](Site s, int state) {
        int n2 = 0;
        if (state == 0) {
            spec.neighbors(s, inner);
            for (Site y : inner) n2 += config.fully.count(y) ? 1 : 0;
        }
        int n = site_events(kind, rates, state, n2, buf, s);
        for (int i = 0; i < n; ++i) {
            out.events.push_back(buf[i]);
            out.total += buf[i].rate;
        }
    };

    for (Site s : config.fully) add_site(s, 2);
    for (Site s : config.semi) add_site(s, 1);
    // Healthy boundary: healthy neighbors of fully-infected sites.
    std::unordered_set<Site> seen;
    for (Site s : config.fully) {
        spec.neighbors(s, nbrs);
        for (Site y : nbrs) {
            if (config.state(y) == 0 && seen.insert(y).second) add_site(y, 0);
        }
    }
    return out;
}

CtmcSimulator::CtmcSimulator(ProcessKind kind, const TorusSpec& spec, const Rates& rates)
    : kind_(kind), spec_(spec), rates_(rates) {
    state_.assign(spec.sites(), 0);
    n2_.assign(spec.sites(), 0);
    version_.assign(spec.sites(), 0);
}

void CtmcSimulator::touch(Site s) { touched_.push_back(s); }

double CtmcSimulator::site_rate(Site s) const {
    switch (state_[s]) {
        case 2:
            return kind_ == ProcessKind::TwoStage ? 1.0 : 1.0 + rates_.delta;
        case 1:
            return (kind_ == ProcessKind::TwoStage ? 1.0 + rates_.delta : 1.0) + rates_.gamma;
        default:
            return n2_[s] > 0 ? rates_.lambda * n2_[s] : 0.0;
    }
}

void CtmcSimulator::redraw(Site s, double now) {
    ++version_[s];
    touch(s);
    double r = site_rate(s);
    if (r > 0.0) {
        heap_.push_back(Clock{now + exp_draw(eng_, r), s, version_[s]});
        std::push_heap(heap_.begin(), heap_.end(), std::greater<>());
    }
}

void CtmcSimulator::apply_state(Site s, int to) {
    int from = state_[s];
    if (from == to) return;
    state_[s] = static_cast<std::uint8_t>(to);
    touch(s);
    if (from == 2) --n_fully_;
    if (from == 1) --n_semi_;
    if (to == 2) ++n_fully_;
    if (to == 1) ++n_semi_;
}

void CtmcSimulator::reset(const Configuration& initial) {
    for (Site s : touched_) {
        state_[s] = 0;
        n2_[s] = 0;
    }
    touched_.clear();
    heap_.clear();
    n_fully_ = 0;
    n_semi_ = 0;
    initial.check_disjoint();
    for (Site s : initial.fully) apply_state(s, 2);
    for (Site s : initial.semi) apply_state(s, 1);
    std::vector<Site> nbrs;
    for (Site s : initial.fully) {
        spec_.neighbors(s, nbrs);
        for (Site y : nbrs) {
            ++n2_[y];
            touch(y);
        }
    }
}

TrajectorySummary CtmcSimulator::run(const Configuration& initial, const SimOptions& opt) {
    return run_with_snapshots(initial, opt, nullptr);
}

TrajectorySummary CtmcSimulator::run_with_snapshots(
    const Configuration& initial, const SimOptions& opt,
    const std::function<void(double, const std::vector<std::uint8_t>&)>& on_sample) {
    eng_ = make_engine(opt.seed);
    reset(initial);

    TrajectorySummary out;
    double now = 0.0;
    std::size_t next_cp = 0;
    std::vector<Site> nbrs;

    // Seed clocks for every site with positive rate (de-duplicated so the
    // draw sequence is a function of the initial configuration only).
    {
        std::vector<Site> seeds = touched_;
        std::sort(seeds.begin(), seeds.end());
        seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
        for (Site s : seeds) redraw(s, 0.0);
    }

    auto emit_checkpoints_until = [&](double t) {
        while (next_cp < opt.checkpoint_times.size() && opt.checkpoint_times[next_cp] <= t) {
            double ct = opt.checkpoint_times[next_cp];
            out.checkpoints.push_back(Checkpoint{ct, n_fully_, n_semi_});
            if (on_sample) on_sample(ct, state_);
            ++next_cp;
        }
    };

    auto note_peaks = [&]() {
        out.peak_fully = std::max(out.peak_fully, n_fully_);
        out.peak_infected = std::max(out.peak_infected, n_fully_ + n_semi_);
    };
    note_peaks();

    auto finish = [&](double t_end) {
        emit_checkpoints_until(t_end);
        // Checkpoints past the end of the run keep the final (absorbed or
        // censored) counts.
        while (next_cp < opt.checkpoint_times.size()) {
            double ct = opt.checkpoint_times[next_cp];
            out.checkpoints.push_back(Checkpoint{ct, n_fully_, n_semi_});
            if (on_sample) on_sample(ct, state_);
            ++next_cp;
        }
        out.final_fully = n_fully_;
        out.final_semi = n_semi_;
    };

    if (n_fully_ + n_semi_ == 0) {
        out.extinct = true;
        out.extinction_time = 0.0;
        finish(0.0);
        return out;
    }

    while (!heap_.empty()) {
        Clock c = heap_.front();
        std::pop_heap(heap_.begin(), heap_.end(), std::greater<>());
        heap_.pop_back();
        if (c.version != version_[c.site]) continue;  // stale clock
        if (c.t > opt.horizon) break;
        emit_checkpoints_until(c.t);
        now = c.t;

        Site x = c.site;
        double r = site_rate(x);
        // Choose the transition within this site's decomposition.
        Event buf[3];
        int n = site_events(kind_, rates_, state_[x], n2_[x], buf, x);
        double u = uniform01(eng_) * r;
        int pick = 0;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += buf[i].rate;
            if (u < acc || i == n - 1) {
                pick = i;
                break;
            }
        }
        int from = state_[x];
        int to = buf[pick].new_state;
        apply_state(x, to);
        note_peaks();

        bool fully_changed = (from == 2) != (to == 2);
        if (fully_changed) {
            int dn = to == 2 ? +1 : -1;
            spec_.neighbors(x, nbrs);
            for (Site y : nbrs) {
                n2_[y] = static_cast<std::uint8_t>(n2_[y] + dn);
                touch(y);
                if (state_[y] == 0) redraw(y, now);
            }
        }
        redraw(x, now);

        if (n_fully_ + n_semi_ == 0) {
            out.extinct = true;
            out.extinction_time = now;
            finish(now);
            return out;
        }
        if (opt.survivor_cap > 0 && n_fully_ + n_semi_ >= opt.survivor_cap) {
            out.reached_cap = true;
            out.cap_time = now;
            finish(now);
            return out;
        }
    }
    finish(opt.horizon);
    return out;
}

TrajectorySummary simulate(ProcessKind kind, const TorusSpec& spec, const Rates& rates,
                           const Configuration& initial, const SimOptions& opt) {
    CtmcSimulator sim(kind, spec, rates);
    return sim.run(initial, opt);
}

SurvivalEstimate estimate_survival(ProcessKind kind, const TorusSpec& spec, const Rates& rates,
                                   const Configuration& initial, double horizon,
                                   std::int64_t replicas, std::uint64_t seed,
                                   std::int64_t survivor_cap, int workers) {
    if (replicas < 1) throw ParameterError("replicas: must be >= 1");
    std::vector<std::uint8_t> alive(replicas, 0);
    int nw = std::max(1, workers);
    if (static_cast<std::int64_t>(nw) > replicas) nw = static_cast<int>(replicas);

    // Block partition, one simulator per worker. Replica i's outcome depends
    // only on its derived seed, so the result is worker-count independent.
    auto run_block = [&](std::int64_t lo, std::int64_t hi) {
        CtmcSimulator sim(kind, spec, rates);
        SimOptions opt;
        opt.horizon = horizon;
        opt.survivor_cap = survivor_cap;
        for (std::int64_t i = lo; i < hi; ++i) {
            opt.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
            TrajectorySummary t = sim.run(initial, opt);
            alive[i] = (!t.extinct || t.reached_cap) ? 1 : 0;
        }
    };
    if (nw == 1) {
        run_block(0, replicas);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (int w = 0; w < nw; ++w) {
            std::int64_t lo = replicas * w / nw;
            std::int64_t hi = replicas * (w + 1) / nw;
            pool.emplace_back(run_block, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    std::int64_t survivors = 0;
    for (auto a : alive) survivors += a;
    auto est = binomial_estimate(survivors, replicas, seed);
    SurvivalEstimate s;
    s.point = est.point;
    s.replicas = replicas;
    s.std_error = est.std_error;
    s.horizon = horizon;
    s.seed = seed;
    s.survivors = survivors;
    s.policy = survivor_cap > 0
                   ? "alive-at-horizon-or-size-cap(" + std::to_string(survivor_cap) +
                         "); censored replicas count as survivors (upper bias)"
                   : "alive-at-horizon; censored replicas count as survivors (upper bias)";
    return s;
}

SparseCsr build_generator(ProcessKind kind, const TorusSpec& spec, const Rates& rates) {
    const std::int64_t n_sites = spec.sites();
    if (n_sites > 8) throw SizeError("exact generator: state space 3^sites exceeds 6561");
    std::int64_t n_states = 1;
    for (std::int64_t i = 0; i < n_sites; ++i) n_states *= 3;

    std::vector<std::map<int, double>> rows(n_states);
    std::vector<int> st(n_sites);
    std::vector<Site> nbrs;
    Event buf[3];
    for (std::int64_t code = 0; code < n_states; ++code) {
        {
            std::int64_t c = code;
            for (std::int64_t i = 0; i < n_sites; ++i) {
                st[i] = static_cast<int>(c % 3);
                c /= 3;
            }
        }
        double diag = 0.0;
        for (std::int64_t s = 0; s < n_sites; ++s) {
            int n2 = 0;
            if (st[s] == 0) {
                spec.neighbors(s, nbrs);
                for (Site y : nbrs) n2 += st[y] == 2 ? 1 : 0;
            }
            int n = site_events(kind, rates, st[s], n2, buf, s);
            std::int64_t p3 = 1;
            for (std::int64_t i = 0; i < s; ++i) p3 *= 3;
            for (int i = 0; i < n; ++i) {
                std::int64_t target = code + p3 * (buf[i].new_state - st[s]);
                rows[code][static_cast<int>(target)] += buf[i].rate;
                diag -= buf[i].rate;
            }
        }
        if (diag != 0.0) rows[code][static_cast<int>(code)] += diag;
    }
    return SparseCsr::from_rows(rows);
}

ExactDistribution exact_distribution(ProcessKind kind, const TorusSpec& spec,
                                     const Rates& rates, const Configuration& initial,
                                     double t) {
    const std::int64_t n_sites = spec.sites();
    if (n_sites > 8) throw SizeError("exact_distribution: site count must be <= 8");
    initial.check_disjoint();
    SparseCsr Q = build_generator(kind, spec, rates);

    std::int64_t code = 0;
    std::int64_t p3 = 1;
    for (std::int64_t s = 0; s < n_sites; ++s) {
        int st = initial.state(s);
        code += p3 * st;
        p3 *= 3;
    }
    std::vector<double> v(Q.rows(), 0.0);
    v[code] = 1.0;

    ExactDistribution dist;
    dist.t = t;
    dist.n_sites = n_sites;
    dist.prob = expm_transpose_apply(Q, std::move(v), t);
    return dist;
}

double hit_event_probability(const ExactDistribution& dist, const std::vector<Site>& A,
                             const std::vector<Site>& B) {
    double p = 0.0;
    for (std::size_t code = 0; code < dist.prob.size(); ++code) {
        bool hit = false;
        for (Site x : A) {
            if (ExactDistribution::digit(code, x) == 2) {
                hit = true;
                break;
            }
        }
        if (!hit) {
            for (Site y : B) {
                if (ExactDistribution::digit(code, y) != 0) {
                    hit = true;
                    break;
                }
            }
        }
        if (hit) p += dist.prob[code];
    }
    return p;
}

}  // namespace tsc
