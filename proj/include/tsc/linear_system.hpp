#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "tsc/expm.hpp"
#include "tsc/lattice.hpp"
#include "tsc/offsets.hpp"
#include "tsc/walk_hitting.hpp"

namespace tsc {

// Index set X4 = torus offsets x {1,2,3} for the second-moment system
// F(x,1) = E[zeta(O) zeta(x)], F(x,2) = E[zeta(O) g(x)], F(x,3) = E[g(O) g(x)].
// The torus has side 2R+1. The reduced mode stores one entry per orbit of the
// hyperoctahedral group (the system and the all-ones initial condition are
// invariant); the unreduced mode keeps every offset, for validation.
class X4Space {
public:
    X4Space(int d, int R, bool reduced);

    int d() const { return d_; }
    int R() const { return R_; }
    bool reduced() const { return reduced_; }
    int n_offsets() const { return n_offsets_; }
    int size() const { return 3 * n_offsets_; }

    int flat(int offset_id, int comp) const { return offset_id * 3 + (comp - 1); }
    int offset_id_of(std::span<const int> offset) const;
    int origin_offset() const { return origin_; }
    int e1_offset() const { return e1_; }
    int offset_l1(int offset_id) const;  // wraparound l1 of the representative
    std::vector<int> representative(int offset_id) const;

    // Enumerates the 2d torus neighbors of an offset (with multiplicity).
    void for_each_neighbor(int offset_id, const std::function<void(int)>& fn) const;

private:
    int d_;
    int R_;
    bool reduced_;
    int n_offsets_;
    int origin_;
    int e1_;
    std::shared_ptr<CanonicalOffsets> canon_;  // reduced mode
    std::shared_ptr<TorusSpec> torus_;         // unreduced mode
};

// The moment generator G as a sparse operator on X4; dF/dt = G F.
class GOperator {
public:
    static GOperator build(const X4Space& space, const Rates& rates);

    int rows() const { return mat_.rows(); }
    void apply(std::span<const double> in, std::span<double> out) const { mat_.apply(in, out); }
    const SparseCsr& matrix() const { return mat_; }

private:
    SparseCsr mat_;
};

struct IntegrateResult {
    std::vector<double> F;   // values at time t
    double sup_F_O1 = 0.0;   // max of F(O,1) along the trajectory
    double min_entry = 0.0;  // min entry seen (positivity check)
    std::int64_t steps = 0;
};

// Integrates dF/dt = G F from F0 = all-ones with an adaptive embedded
// Dormand-Prince pair; throws StepError when step control collapses.
IntegrateResult integrate_moments(const GOperator& G, const X4Space& space, double t,
                                  double tol = 1e-8);

// K(x,i) = Gamma(x,i) + h off (O,3); K(O,3) = gamma [1 - 2 Gamma(e1,1) - h].
// Throws DomainError when the minimum entry is <= 0 (lambda at or below
// lambda-tilde, or the hitting table's radius too small).
std::vector<double> build_K(const X4Space& space, const ThetaTable& theta, double h,
                            double gamma);

// Applies G to K and reports the residual split the acceptance gate uses.
struct ResidualReport {
    double origin_rows = 0.0;        // max |(GK)(O,i)|
    double interior_rows = 0.0;      // max over offsets with l1 < R-1
    double all_rows = 0.0;
};
ResidualReport eigen_identity_residual(const GOperator& G, const X4Space& space,
                                       std::span<const double> K);

// ----- the linear-system process itself -----

// One flip of the auxiliary process at a site: kind 0 resets to (0,0), kind 1
// clears g, kind 2 promotes (zeta + g/gamma, 0), kind 3 adds b*zeta(y) to g.
inline std::pair<double, double> apply_flip(int kind, std::pair<double, double> zg,
                                            double zeta_y, double gamma, double b) {
    switch (kind) {
        case 0: return {0.0, 0.0};
        case 1: return {zg.first, 0.0};
        case 2: return {zg.first + zg.second / gamma, 0.0};
        default: return {zg.first, zg.second + b * zeta_y};
    }
}

struct LinearFieldOptions {
    double horizon = 1.0;
    std::uint64_t seed = 0;
    std::vector<double> checkpoint_times;  // sorted ascending
};

// Event-driven simulation from the all-(1,1) start; on_checkpoint receives
// the dense field at each checkpoint time.
void simulate_linear_field(
    const TorusSpec& spec, const Rates& rates, const LinearFieldOptions& opt,
    const std::function<void(double, std::span<const std::pair<double, double>>)>&
        on_checkpoint);

// Replica means of (zeta_t(O), g_t(O), zeta_t(O)^2) at the checkpoint times.
struct FieldMoments {
    std::vector<double> times;
    std::vector<double> mean_zeta, se_zeta;
    std::vector<double> mean_g, se_g;
    std::vector<double> mean_zeta_sq, se_zeta_sq;
};
FieldMoments field_moments(const TorusSpec& spec, const Rates& rates,
                           std::span<const double> times, std::int64_t replicas,
                           std::uint64_t seed, int workers = 1);

}  // namespace tsc
