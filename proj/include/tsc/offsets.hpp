#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

// Canonical lattice offsets under the hyperoctahedral group (coordinate
// permutations and sign flips): componentwise absolute value, sorted
// descending. The process laws are invariant under this group, so hitting
// tables and moment vectors are stored per orbit.
//
// Domain::Ball enumerates orbits with l1 <= R on Z^d; Domain::Torus
// enumerates orbits of the torus of side 2R+1 (every coordinate in [-R, R]).
class CanonicalOffsets {
public:
    enum class Domain { Ball, Torus };

    CanonicalOffsets(int d, int R, Domain domain) : d_(d), R_(R), domain_(domain) {
        if (d < 1) throw ParameterError("d: must be >= 1");
        if (R < 1) throw ParameterError("R: must be >= 1");
        std::vector<int> v(d, 0);
        enumerate(v, 0, R, 0);
    }

    int d() const { return d_; }
    int R() const { return R_; }
    Domain domain() const { return domain_; }
    int size() const { return static_cast<int>(reps_.size()); }

    const std::vector<int>& rep(int idx) const { return reps_[idx]; }
    int l1(int idx) const { return l1_[idx]; }

    int find(const std::vector<int>& canon) const {
        auto it = lookup_.find(canon);
        return it == lookup_.end() ? -1 : it->second;
    }

    // Canonicalize an arbitrary offset for this domain and look it up.
    int find_offset(std::vector<int> offset) const { return find(canonicalize(std::move(offset))); }

    // abs, torus wrap (Torus domain only), sort descending.
    std::vector<int> canonicalize(std::vector<int> v) const {
        const int L = 2 * R_ + 1;
        for (int& c : v) {
            if (domain_ == Domain::Torus) {
                c %= L;
                if (c < 0) c += L;
                if (c > R_) c -= L;
            }
            c = std::abs(c);
        }
        std::sort(v.begin(), v.end(), std::greater<int>());
        return v;
    }

    // Enumerates the canonical forms of the 2d lattice neighbors of rep(idx),
    // including multiplicity: fn is called exactly 2d times.
    template <class F>
    void for_each_neighbor(int idx, F&& fn) const {
        std::vector<int> v = reps_[idx];
        for (int k = 0; k < d_; ++k) {
            for (int dir : {+1, -1}) {
                std::vector<int> w = v;
                w[k] += dir;
                fn(canonicalize(std::move(w)));
            }
        }
    }

    int origin_index() const { return find(std::vector<int>(d_, 0)); }
    int e1_index() const {
        std::vector<int> e1(d_, 0);
        e1[0] = 1;
        return find(e1);
    }

private:
    void enumerate(std::vector<int>& v, int pos, int max_coord, int used_l1) {
        if (pos == d_) {
            std::vector<int> canon = v;
            // v is built non-increasing and nonnegative already.
            l1_.push_back(used_l1);
            lookup_[canon] = static_cast<int>(reps_.size());
            reps_.push_back(std::move(canon));
            return;
        }
        int cap = std::min(max_coord, R_);
        for (int c = cap; c >= 0; --c) {
            if (domain_ == Domain::Ball && used_l1 + c > R_) continue;
            v[pos] = c;
            enumerate(v, pos + 1, c, used_l1 + c);
        }
        v[pos] = 0;
    }

    int d_;
    int R_;
    Domain domain_;
    std::vector<std::vector<int>> reps_;
    std::vector<int> l1_;
    std::map<std::vector<int>, int> lookup_;
};

}  // namespace tsc
