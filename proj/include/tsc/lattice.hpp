#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

// Packed site index over the torus, mixed-radix base L per axis.
using Site = std::int64_t;

// Model parameters of the process: infection rate per fully-infected
// neighbor, extra recovery rate of semi-infected sites, promotion rate.
struct Rates {
    double lambda = 1.0;
    double delta = 1.0;
    double gamma = 1.0;

    double sum() const { return 1.0 + delta + gamma; }
    // b = (1+delta+gamma) / (2 d lambda), the coupling weight of the linear
    // system's infection flip.
    double b(int d) const { return sum() / (2.0 * d * lambda); }
};

// Finite torus (Z/L)^d. L >= 3 so the 2d neighbors of a site are distinct.
class TorusSpec {
public:
    TorusSpec(int d, int L);

    int d() const { return d_; }
    int L() const { return L_; }
    std::int64_t sites() const { return sites_; }

    Site encode(std::span<const int> coords) const;
    void decode(Site s, std::span<int> out) const;
    std::vector<int> coords(Site s) const;

    // Neighbor along +/- axis; dir is +1 or -1.
    Site shift(Site s, int axis, int dir) const {
        std::int64_t stride = strides_[axis];
        int c = static_cast<int>((s / stride) % L_);
        int nc = c + dir;
        if (nc < 0) nc += L_;
        if (nc >= L_) nc -= L_;
        return s + static_cast<std::int64_t>(nc - c) * stride;
    }

    void neighbors(Site s, std::vector<Site>& out) const;
    std::vector<Site> neighbors(Site s) const;

    // l1 distance with per-axis wraparound min(|a-b|, L-|a-b|).
    int l1(Site a, Site b) const;

    Site origin() const { return 0; }
    Site unit(int axis) const { return strides_[axis]; }

    bool operator==(const TorusSpec& o) const { return d_ == o.d_ && L_ == o.L_; }

private:
    int d_;
    int L_;
    std::int64_t sites_;
    std::vector<std::int64_t> strides_;
};

// Sparse configuration: the disjoint sets of fully- and semi-infected sites.
// Everything else is healthy.
struct Configuration {
    std::unordered_set<Site> fully;
    std::unordered_set<Site> semi;

    int state(Site s) const {
        if (fully.count(s)) return 2;
        if (semi.count(s)) return 1;
        return 0;
    }
    std::int64_t infected_count() const {
        return static_cast<std::int64_t>(fully.size() + semi.size());
    }
    bool empty() const { return fully.empty() && semi.empty(); }
    // Throws OverlapError if the two sets intersect.
    void check_disjoint() const;
};

// Validated parameter record with the cached derived constants.
struct Params {
    Rates rates;
    TorusSpec spec;
    double s;  // 1 + delta + gamma
    double b;  // (1+delta+gamma) / (2 d lambda)
};

// Rejects non-positive rates, d < 1 and L < 3; names the offending field.
Params validate(const Rates& rates, const TorusSpec& spec);

}  // namespace tsc
