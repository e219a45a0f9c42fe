#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "tsc/lattice.hpp"

namespace tsc {

// Mark alphabet of the graphical representation. Delta kills any infected
// state, Star kills the semi-infected state only, Diamond promotes semi to
// fully, Arrow carries infection from a fully-infected source to a healthy
// target.
enum class MarkKind : int { Delta = 0, Star = 1, Diamond = 2, Arrow = 3 };

struct SiteMarks {
    std::vector<double> delta;    // rate 1
    std::vector<double> star;     // rate delta
    std::vector<double> diamond;  // rate gamma
    // arrows[k]: arrow times from this site to its k-th neighbor
    // (k = 2*axis + (0 for +1, 1 for -1)), each stream rate lambda.
    std::vector<std::vector<double>> arrows;
};

// Poisson mark timelines on (0, horizon], one independent stream per site
// mark kind and per directed edge. Streams are keyed by (seed, site, kind),
// so a site's lists are the same no matter in which order sites materialize.
class GraphicalTimeline {
public:
    GraphicalTimeline(const TorusSpec& spec, const Rates& rates, double horizon,
                      std::uint64_t seed);

    // Explicit timeline for tests: every listed site is materialized, nothing
    // is generated.
    static GraphicalTimeline from_marks(const TorusSpec& spec, double horizon,
                                        std::map<Site, SiteMarks> marks);

    const SiteMarks& marks(Site s) const;
    bool lazy() const { return lazy_; }
    double horizon() const { return horizon_; }
    const TorusSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

private:
    TorusSpec spec_;
    Rates rates_{};
    double horizon_;
    std::uint64_t seed_ = 0;
    bool lazy_;
    mutable std::unordered_map<Site, SiteMarks> cache_;
};

struct PairInitial {
    std::vector<Site> fully;  // C: fully infected at t=0
    std::vector<Site> semi;   // D: semi infected at t=0
};

struct StateChange {
    double t;
    Site site;
    std::uint8_t from;
    std::uint8_t to;
};

struct PairTrajectory {
    PairInitial initial;
    double extinction_time = std::numeric_limits<double>::infinity();
    std::vector<StateChange> changes;
    // (time, |I_t|) after each change; starts with (0, initial count).
    std::vector<std::pair<double, std::int64_t>> infected_curve;
};

// All requested initial pairs evolved on one shared timeline; trajectories
// are deterministic functions of the timeline.
struct CoupledTrajectory {
    double horizon = 0.0;
    std::vector<PairTrajectory> pairs;

    std::int64_t infected_count_at(std::size_t pair, double t) const;
    Configuration state_at(std::size_t pair, double t) const;
};

CoupledTrajectory evolve_coupled(const GraphicalTimeline& timeline,
                                 const std::vector<PairInitial>& initials);

// H_t(C,D): 1 iff the pair's infected set is nonempty at time t (t <= horizon).
int survival_indicator(const CoupledTrajectory& traj, std::size_t pair, double t);

// Streams per-pair checkpoint summaries as CSV rows
// (pair, t, n_fully, n_semi) with a header.
void write_trajectory_csv(std::ostream& out, const CoupledTrajectory& traj,
                          const std::vector<double>& checkpoint_times);

}  // namespace tsc
