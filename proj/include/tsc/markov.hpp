#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsc/expm.hpp"
#include "tsc/lattice.hpp"
#include "tsc/rng.hpp"
#include "tsc/stats.hpp"

namespace tsc {

// TwoStage is the process under study; OnOff is its dual. They differ only in
// the state-2 and state-1 exit rates:
//   TwoStage: 2->0 at 1;        1->0 at 1+delta; 1->2 at gamma; 0->1 at lambda * #fully-nbrs
//   OnOff:    2->0 at 1, 2->1 at delta; 1->0 at 1; 1->2 at gamma; 0->1 at lambda * #fully-nbrs
enum class ProcessKind { TwoStage, OnOff };

struct Event {
    Site site;
    int new_state;
    double rate;
};

struct RateDecomposition {
    double total = 0.0;
    std::vector<Event> events;
};

// Per-site transition rates given current state and fully-infected neighbor
// count. Shared by the simulator, the exact-generator builder and total_rate,
// so they cannot drift apart.
inline int site_events(ProcessKind kind, const Rates& r, int state, int n_fully_nbrs,
                       Event* out, Site site) {
    int n = 0;
    switch (state) {
        case 2:
            out[n++] = Event{site, 0, 1.0};
            if (kind == ProcessKind::OnOff) out[n++] = Event{site, 1, r.delta};
            break;
        case 1:
            out[n++] = Event{site, 0, kind == ProcessKind::TwoStage ? 1.0 + r.delta : 1.0};
            out[n++] = Event{site, 2, r.gamma};
            break;
        default:
            if (n_fully_nbrs > 0) out[n++] = Event{site, 1, r.lambda * n_fully_nbrs};
            break;
    }
    return n;
}

RateDecomposition total_rate(ProcessKind kind, const Configuration& config,
                             const TorusSpec& spec, const Rates& rates);

struct Checkpoint {
    double t;
    std::int64_t n_fully;
    std::int64_t n_semi;
};

struct TrajectorySummary {
    bool extinct = false;
    double extinction_time = 0.0;  // meaningful iff extinct
    bool reached_cap = false;
    double cap_time = 0.0;  // meaningful iff reached_cap
    std::int64_t final_fully = 0;
    std::int64_t final_semi = 0;
    std::int64_t peak_fully = 0;     // max |C_t| over the run
    std::int64_t peak_infected = 0;  // max |C_t| + |D_t|
    std::vector<Checkpoint> checkpoints;
};

struct SimOptions {
    double horizon = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> checkpoint_times;  // must be sorted ascending
    // When > 0, a replica whose infected count reaches this value stops early
    // and counts as a survivor (upper-biases survival; recorded in policy).
    std::int64_t survivor_cap = 0;
};

TrajectorySummary simulate(ProcessKind kind, const TorusSpec& spec, const Rates& rates,
                           const Configuration& initial, const SimOptions& opt);

// Reusable simulator for replica loops on the same torus; avoids re-zeroing
// dense per-site arrays between replicas.
class CtmcSimulator {
public:
    CtmcSimulator(ProcessKind kind, const TorusSpec& spec, const Rates& rates);
    TrajectorySummary run(const Configuration& initial, const SimOptions& opt);
    // Runs and invokes on_sample(t, states) at each checkpoint time; states is
    // the dense per-site state array (values 0/1/2).
    TrajectorySummary run_with_snapshots(
        const Configuration& initial, const SimOptions& opt,
        const std::function<void(double, const std::vector<std::uint8_t>&)>& on_sample);

private:
    struct Clock {
        double t;
        Site site;
        std::uint64_t version;
        bool operator>(const Clock& o) const {
            if (t != o.t) return t > o.t;
            if (site != o.site) return site > o.site;
            return version > o.version;
        }
    };

    void touch(Site s);
    void reset(const Configuration& initial);
    double site_rate(Site s) const;
    void redraw(Site s, double now);
    void apply_state(Site s, int to);

    ProcessKind kind_;
    TorusSpec spec_;
    Rates rates_;
    std::vector<std::uint8_t> state_;
    std::vector<std::uint8_t> n2_;  // fully-infected neighbor counts
    std::vector<std::uint64_t> version_;
    std::vector<Site> touched_;
    std::vector<Clock> heap_;
    std::int64_t n_fully_ = 0, n_semi_ = 0;
    Engine eng_;
};

struct SurvivalEstimate {
    double point = 0.0;
    std::int64_t replicas = 0;
    double std_error = 0.0;
    double horizon = 0.0;
    std::string policy;  // threshold policy descriptor
    std::uint64_t seed = 0;
    std::int64_t survivors = 0;
};

SurvivalEstimate estimate_survival(ProcessKind kind, const TorusSpec& spec, const Rates& rates,
                                   const Configuration& initial, double horizon,
                                   std::int64_t replicas, std::uint64_t seed,
                                   std::int64_t survivor_cap = 0, int workers = 1);

// Exact CTMC distribution on tiny instances (site count <= 8), the
// brute-force oracle behind the duality checks. State codes are base-3 over
// packed site indices.
struct ExactDistribution {
    double t = 0.0;
    std::int64_t n_sites = 0;
    std::vector<double> prob;  // size 3^n_sites

    static int digit(std::int64_t code, std::int64_t site) {
        while (site-- > 0) code /= 3;
        return static_cast<int>(code % 3);
    }
};

SparseCsr build_generator(ProcessKind kind, const TorusSpec& spec, const Rates& rates);

ExactDistribution exact_distribution(ProcessKind kind, const TorusSpec& spec,
                                     const Rates& rates, const Configuration& initial,
                                     double t);

// P(some x in A has state 2, or some y in B has state != 0) under dist.
double hit_event_probability(const ExactDistribution& dist, const std::vector<Site>& A,
                             const std::vector<Site>& B);

}  // namespace tsc
