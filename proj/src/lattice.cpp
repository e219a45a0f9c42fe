#include "tsc/lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

namespace tsc {

TorusSpec::TorusSpec(int d, int L) : d_(d), L_(L) {
    if (d < 1 || d > 16) throw ParameterError("d: dimension must be in [1,16]");
    if (L < 3) throw ParameterError("L: side length must be >= 3");
    strides_.resize(d);
    std::int64_t acc = 1;
    for (int k = 0; k < d; ++k) {
        strides_[k] = acc;
        if (acc > std::numeric_limits<std::int64_t>::max() / L) {
            throw ParameterError("L: site count L^d overflows 64-bit index");
        }
        acc *= L;
    }
    sites_ = acc;
}

Site TorusSpec::encode(std::span<const int> coords) const {
    Site s = 0;
    for (int k = 0; k < d_; ++k) {
        int c = coords[k] % L_;
        if (c < 0) c += L_;
        s += static_cast<std::int64_t>(c) * strides_[k];
    }
    return s;
}

void TorusSpec::decode(Site s, std::span<int> out) const {
    for (int k = 0; k < d_; ++k) {
        out[k] = static_cast<int>((s / strides_[k]) % L_);
    }
}

std::vector<int> TorusSpec::coords(Site s) const {
    std::vector<int> c(d_);
    decode(s, c);
    return c;
}

void TorusSpec::neighbors(Site s, std::vector<Site>& out) const {
    out.clear();
    out.reserve(2 * d_);
    for (int k = 0; k < d_; ++k) {
        out.push_back(shift(s, k, +1));
        out.push_back(shift(s, k, -1));
    }
}

std::vector<Site> TorusSpec::neighbors(Site s) const {
    std::vector<Site> out;
    neighbors(s, out);
    return out;
}

int TorusSpec::l1(Site a, Site b) const {
    int dist = 0;
    for (int k = 0; k < d_; ++k) {
        int ca = static_cast<int>((a / strides_[k]) % L_);
        int cb = static_cast<int>((b / strides_[k]) % L_);
        int diff = std::abs(ca - cb);
        dist += std::min(diff, L_ - diff);
    }
    return dist;
}

void Configuration::check_disjoint() const {
    const auto& small = fully.size() <= semi.size() ? fully : semi;
    const auto& large = fully.size() <= semi.size() ? semi : fully;
    for (Site s : small) {
        if (large.count(s)) {
            throw OverlapError("configuration: fully and semi sets overlap at site " +
                               std::to_string(s));
        }
    }
}

Params validate(const Rates& rates, const TorusSpec& spec) {
    if (!(rates.lambda > 0.0) || !std::isfinite(rates.lambda)) {
        throw ParameterError("lambda: must be a positive finite real");
    }
    if (!(rates.delta > 0.0) || !std::isfinite(rates.delta)) {
        throw ParameterError("delta: must be a positive finite real");
    }
    if (!(rates.gamma > 0.0) || !std::isfinite(rates.gamma)) {
        throw ParameterError("gamma: must be a positive finite real");
    }
    // TorusSpec construction already rejects L < 3 and bad d; re-validate so a
    // default-constructed spec smuggled in cannot bypass the checks.
    if (spec.L() < 3) throw ParameterError("L: side length must be >= 3");
    Params p{rates, spec, rates.sum(), rates.b(spec.d())};
    return p;
}

}  // namespace tsc
